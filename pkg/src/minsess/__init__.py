"""minsess: a toolchain for a higher-order session calculus.

Parse, typecheck, decompose into minimal-session-typed trios, optimize
(duos / monadic form), and execute processes; verify that decomposition
output typechecks with sequencing-free session types.
"""

__version__ = "0.1.0"
