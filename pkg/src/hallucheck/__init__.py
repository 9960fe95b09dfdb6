"""Citation integrity scanner.

Extracts references from papers, matches cited titles and identifiers
against bibliographic snapshots, flags citations that cannot be resolved,
and drives a human triage workflow over the results.
"""

__version__ = "0.1.0"
