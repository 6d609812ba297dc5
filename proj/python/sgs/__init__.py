"""Foreground/background crop consistency scoring.

Thin re-export of the compiled ``_sgs`` extension plus a few conveniences.
"""

from ._sgs import *  # noqa: F401,F403
from ._sgs import (
    Backends,
    CropPair,
    cli_main,
    load_pairs_csv,
    score_pairs,
    write_rows,
)

__all__ = [name for name in dir() if not name.startswith("_")]


def score_manifest(manifest, out=None, captioner=DEFAULT_CAPTIONER, encoder=DEFAULT_ENCODER,  # noqa: F405
                   tau=DEFAULT_TAU, jobs=1, **backend_options):  # noqa: F405
    """Scores every pair of a manifest CSV; writes the rows when ``out`` is given."""
    backends = Backends(captioner=captioner, encoder=encoder, **backend_options)
    rows, failures = score_pairs(load_pairs_csv(manifest), backends, tau=tau, jobs=jobs)
    if out is not None:
        write_rows(rows, out)
    return rows, failures


def main(argv=None):
    import sys

    code, out, err = cli_main(list(sys.argv[1:] if argv is None else argv))
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
