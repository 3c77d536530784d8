"""
Run configuration: `[section]` headers, `key = value` lines, `#` comments.

Each section is validated by a pydantic model that forbids unknown keys;
validation errors are re-raised as ConfigParseError carrying the line of the
offending key. `charge` (in [charges]) and `species` (in [problem]) may be
repeated, every other key must be unique.
"""

import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.exceptions import ConfigParseError

logger = logging.getLogger(__name__)

COMMANDS = ("surface", "mesh", "solve", "verify", "convergence", "energy")
REPEATABLE = {("charges", "charge"), ("problem", "species")}


def _split_numbers(value, cast=float) -> Tuple:
    if isinstance(value, str):
        value = value.replace(",", " ").split()
    return tuple(cast(v) for v in value)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class RunSection(_Section):
    command: Literal["surface", "mesh", "solve", "verify", "convergence", "energy"]
    output: str = Field(default="results", description="Output directory")
    seed: int = Field(default=42, description="Seed of the verification generator")
    threads: Optional[int] = Field(default=None, ge=1, description="Worker threads for studies")


class GeometrySection(_Section):
    kind: Literal["disk", "pqr"] = "disk"
    r_m: float = Field(default=1.0, gt=0)
    r_iel: float = Field(default=1.5, gt=0)
    half_width: float = Field(default=3.0, gt=0)
    n: int = Field(default=8, ge=8, description="Nodes on the molecule circle")
    refinements: int = Field(default=0, ge=0, le=6)
    mesh_path: Optional[str] = None
    pqr_path: Optional[str] = None
    probe_radius: float = Field(default=1.4, gt=0)
    ion_radius: float = Field(default=2.0, gt=0)
    grid_spacing: float = Field(default=0.25, gt=0)
    dimension: int = Field(default=2, ge=2, le=3)
    length_scale: float = Field(default=1e-8, gt=0, description="cm per PQR length unit")

    @model_validator(mode="after")
    def _ordering(self):
        if not self.half_width > self.r_iel > self.r_m:
            raise ValueError("geometry needs r_m < r_iel < half_width")
        if self.kind == "pqr" and self.pqr_path is None:
            raise ValueError("kind = pqr needs pqr_path")
        if self.ion_radius <= self.probe_radius:
            raise ValueError("ion_radius must exceed probe_radius")
        return self


class ChargesSection(_Section):
    charge: List[Tuple[float, ...]] = Field(default_factory=list,
                                            description="x y valence [radius] per charge")

    @field_validator("charge", mode="before")
    @classmethod
    def _parse(cls, value):
        rows = [value] if isinstance(value, str) else list(value)
        parsed = [_split_numbers(row) for row in rows]
        for row in parsed:
            if len(row) not in (3, 4):
                raise ValueError(f"charge needs 'x y valence [radius]', got {row}")
        return parsed


class ProblemSection(_Section):
    eps_m: float = Field(default=2.0, gt=0)
    eps_s: float = Field(default=80.0, gt=0)
    eps_s_gradient: Tuple[float, float] = (0.0, 0.0)
    temperature: float = Field(default=298.15, gt=0)
    unit_mode: Literal["physical", "synthetic"] = "physical"
    length_unit: float = Field(default=1.0, gt=0, description="cm per mesh length unit")
    ionic_strength: Optional[float] = Field(default=None, ge=0, description="mol/L, 1:1 electrolyte")
    species: List[Tuple[float, int]] = Field(default_factory=list,
                                             description="concentration valence per species")

    @field_validator("eps_s_gradient", mode="before")
    @classmethod
    def _gradient(cls, value):
        return _split_numbers(value)

    @field_validator("species", mode="before")
    @classmethod
    def _species(cls, value):
        rows = [value] if isinstance(value, str) else list(value)
        parsed = []
        for row in rows:
            numbers = _split_numbers(row)
            if len(numbers) != 2:
                raise ValueError(f"species needs 'concentration valence', got {row}")
            parsed.append((numbers[0], int(numbers[1])))
        return parsed

    @model_validator(mode="after")
    def _one_source(self):
        if self.ionic_strength is not None and self.species:
            raise ValueError("give either ionic_strength or species, not both")
        return self


class SolverSection(_Section):
    model: Literal["gpbe", "lgpbe"] = "gpbe"
    splitting: Literal["two_term", "three_term"] = "two_term"
    bc_mode: Literal["zero", "restricted_G", "screened"] = "restricted_G"
    tol: float = Field(default=1e-10, gt=0)
    maxit: int = Field(default=50, ge=1)
    armijo_c: float = Field(default=1e-4, gt=0, lt=1)
    backtrack: float = Field(default=0.5, gt=0, lt=1)
    min_step: float = Field(default=1e-12, gt=0)
    cg_tol: float = Field(default=1e-12, gt=0)
    cg_maxit: Optional[int] = Field(default=None, ge=1)
    precond: Literal["jacobi", "none"] = "jacobi"


class VerifySection(_Section):
    case: Literal["linear_jump", "semilinear_neutral", "semilinear_nonneutral", "linear_exact"] = "linear_jump"
    levels: int = Field(default=4, ge=1, le=7)
    n: int = Field(default=8, ge=8)


SECTIONS = {
    'run': RunSection,
    'geometry': GeometrySection,
    'charges': ChargesSection,
    'problem': ProblemSection,
    'solver': SolverSection,
    'verify': VerifySection,
}


class RunConfig(BaseModel):
    """Fully defaulted configuration of one command"""
    model_config = ConfigDict(extra="forbid")

    run: RunSection
    geometry: GeometrySection = Field(default_factory=GeometrySection)
    charges: ChargesSection = Field(default_factory=ChargesSection)
    problem: ProblemSection = Field(default_factory=ProblemSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    verify: VerifySection = Field(default_factory=VerifySection)

    @property
    def command(self) -> str:
        return self.run.command


def _tokenize(text: str):
    """Returns ({section: {key: [(line, value), ...]}}, {section: header line})"""
    sections: Dict[str, Dict[str, List[Tuple[int, str]]]] = {}
    headers: Dict[str, int] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in SECTIONS:
                raise ConfigParseError(f"unknown section [{current}]", line=lineno)
            if current in headers:
                raise ConfigParseError(f"section [{current}] appears twice", line=lineno)
            headers[current] = lineno
            sections[current] = {}
            continue
        if current is None:
            raise ConfigParseError("key outside of any [section]", line=lineno)
        if "=" not in line:
            raise ConfigParseError(f"expected 'key = value', got '{line}'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigParseError("empty key", line=lineno)
        entries = sections[current].setdefault(key, [])
        if entries and (current, key) not in REPEATABLE:
            raise ConfigParseError(f"duplicate key '{key}' in [{current}]", line=lineno)
        entries.append((lineno, value))
    return sections, headers


def _validate_section(name: str, entries: Dict[str, List[Tuple[int, str]]], header: int):
    data = {}
    for key, values in entries.items():
        if (name, key) in REPEATABLE:
            data[key] = [v for _, v in values]
        else:
            data[key] = values[0][1]
    try:
        return SECTIONS[name].model_validate(data)
    except ValidationError as exc:
        error = exc.errors()[0]
        key = str(error['loc'][0]) if error['loc'] else None
        line = entries[key][0][0] if key in entries else header
        if error['type'] == 'extra_forbidden':
            message = f"unknown key '{key}' in [{name}]"
        elif error['type'] == 'missing':
            message = f"missing required key '{key}' in [{name}]"
        else:
            where = f"'{key}'" if key else f"[{name}]"
            message = f"invalid value for {where}: {error['msg']}"
        raise ConfigParseError(message, line=line) from exc


def parse_config(text: str, overrides: Optional[Dict[str, Dict[str, str]]] = None,
                 base_dir: Optional[Union[str, Path]] = None) -> RunConfig:
    """
    Parse and validate configuration text.

    Args:
        text: configuration text
        overrides: {section: {key: value}} applied before validation (the
            CLI passes the command and its flags here)
        base_dir: directory against which relative input paths are checked

    Raises:
        ConfigParseError: with the line number of the offending entry
    """
    sections, headers = _tokenize(text)
    for name, values in (overrides or {}).items():
        target = sections.setdefault(name, {})
        headers.setdefault(name, 0)
        for key, value in values.items():
            if value is not None:
                target[key] = [(0, str(value))]

    validated = {name: _validate_section(name, sections.get(name, {}), headers.get(name, 0))
                 for name in SECTIONS if name in sections or name == 'run'}
    config = RunConfig(**validated)

    base = Path(base_dir) if base_dir is not None else Path.cwd()
    for key in ("pqr_path", "mesh_path"):
        value = getattr(config.geometry, key)
        if value is not None and not (base / value).exists():
            line = sections.get('geometry', {}).get(key, [(0, "")])[0][0]
            raise ConfigParseError(f"{key} '{value}' does not exist", line=line)
    if config.geometry.kind == "disk" and not config.charges.charge and config.command in (
            "solve", "energy"):
        raise ConfigParseError("missing required key 'charge' in [charges]",
                               line=headers.get('charges', 0))
    logger.debug("Parsed configuration for command '%s'", config.command)
    return config


def read_config(path: Union[str, Path], overrides=None) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), overrides, base_dir=path.parent)


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return " ".join(_render(v) for v in value)
    return str(value)


def echo_config(config: RunConfig) -> str:
    """Fully defaulted configuration text; parse_config(echo_config(c)) == c"""
    lines = []
    for name in SECTIONS:
        section = getattr(config, name)
        lines.append(f"[{name}]")
        for key, value in section.model_dump().items():
            if value is None:
                continue
            if (name, key) in REPEATABLE:
                lines.extend(f"{key} = {_render(row)}" for row in value)
            else:
                lines.append(f"{key} = {_render(value)}")
        lines.append("")
    return "\n".join(lines)
