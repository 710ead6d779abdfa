"""yulverify: deductive verification for annotated Yul-style contract IR.

Pipeline: parse annotated units, translate function bodies into an
exception-structured verification IR, generate first-order obligations by
weakest precondition, infer polynomial loop invariants from execution traces,
run static vulnerability pattern checks, and discharge obligations with an
external SMT solver.
"""

__version__ = "0.1.0"
