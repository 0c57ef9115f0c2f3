"""Netlist language for linear-optical networks: parse, compile, execute, serialize."""

from .compiler import (
    Circuit,
    Propagator,
    circuit_to_dict,
    compile,
    compile_text,
    emit_canonical,
    execute,
    iter_execute,
    load_canonical,
    to_document,
    to_netlist,
)
from .parser import NetlistDocument, parse, pretty_print

__all__ = [
    "Circuit",
    "NetlistDocument",
    "Propagator",
    "circuit_to_dict",
    "compile",
    "compile_text",
    "emit_canonical",
    "execute",
    "iter_execute",
    "load_canonical",
    "parse",
    "pretty_print",
    "to_document",
    "to_netlist",
]
