"""Verification workbench for the CAO active-object language.

Parse programs, execute them under a two-layer trace semantics (symbolic
per-method traces, concrete object/system composition), evaluate first- and
second-order trace properties, and check methods against behavioral method
types in a sequent calculus with an executable runtime cross-check.
"""

__version__ = "0.1.0"
