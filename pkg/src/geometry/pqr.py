"""
PQR ingestion.

Only ATOM/HETATM records are read. The last five whitespace-separated fields
of each record are x, y, z (Angstrom), charge and radius (Angstrom); residue
and atom names are ignored, which tolerates the many PQR dialects written by
PDB2PQR and friends.
"""

import io
import logging
from pathlib import Path
from typing import Iterable, TextIO, Union

import numpy as np

from src.core_model import ChargeSystem
from src.exceptions import ConfigurationError, EmptyInputError, PQRParseError

logger = logging.getLogger(__name__)

ANGSTROM_CM = 1e-8
RECORD_TYPES = ("ATOM", "HETATM")


def ingest_pqr(
    stream: Union[str, TextIO, Iterable[str]],
    length_unit: float = ANGSTROM_CM,
    dimension: int = 3,
) -> ChargeSystem:
    """
    Read point charges from PQR text.

    Args:
        stream: PQR text, an open text stream or an iterable of lines
        length_unit: centimetres per output length unit (default Angstrom)
        dimension: 3, or 2 to project the charges onto the xy plane

    Returns:
        ChargeSystem with one charge per ATOM/HETATM record
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    factor = ANGSTROM_CM / length_unit

    positions, valences, radii = [], [], []
    for lineno, line in enumerate(stream, start=1):
        tokens = line.split()
        if not tokens or tokens[0].upper() not in RECORD_TYPES:
            continue
        if len(tokens) < 6:
            raise PQRParseError(f"{tokens[0]} record needs x y z charge radius", line=lineno)
        try:
            x, y, z, q, r = (float(tok) for tok in tokens[-5:])
        except ValueError as exc:
            raise PQRParseError(f"malformed numeric field ({exc})", line=lineno) from None
        if r < 0:
            raise PQRParseError(f"negative radius {r}", line=lineno)
        positions.append((x, y, z))
        valences.append(q)
        radii.append(r)

    if not positions:
        raise EmptyInputError("PQR input contains no ATOM/HETATM records")

    positions = np.asarray(positions) * factor
    if dimension == 2:
        positions = positions[:, :2]
    elif dimension != 3:
        raise ConfigurationError(f"dimension must be 2 or 3, got {dimension}")
    logger.info("Read %d charges from PQR input", len(valences))
    return ChargeSystem.from_arrays(positions, valences, np.asarray(radii) * factor)


def load_pqr(path: Union[str, Path], **kwargs) -> ChargeSystem:
    """ingest_pqr on a file path"""
    with open(path, "r", encoding="utf-8") as fh:
        return ingest_pqr(fh, **kwargs)
