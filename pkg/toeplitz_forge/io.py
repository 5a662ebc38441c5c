"""JSON schemas, bundle directories and window emission.

Every JSON file is written from a pydantic model. Integers that can grow
past 64 bits are written as decimal strings and read back from strings or
plain ints; rationals are written as "p/q".
"""

import csv
import itertools
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, RootModel, ValidationError

from . import __version__
from .blocks import Arrangement, BlockFamily, SparseArrangement, assemble_family, evaluate_x0
from .choquet import FINITE, STAGEWISE, SimplexSpec
from .config import ForgeSettings
from .errors import BundleFormatError, ForgeError, InputInvalidError
from .invariants import Witness, ordered_group_witness, simplex_vertices
from .lattice import ChainLevel, Domain, Lattice, LatticeChain
from .matrices import ManagedSequence, Matrix
from .pipeline import SystemBundle
from .reports import Check, Report

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

CHAIN_FILE = "chain.json"
MATRICES_FILE = "matrices.json"
BLOCKS_FILE = "blocks.json"
REPORTS_FILE = "reports.json"
WITNESS_FILE = "witness.json"
MANIFEST_FILE = "manifest.json"
BUNDLE_FILES = (CHAIN_FILE, MATRICES_FILE, BLOCKS_FILE, REPORTS_FILE, WITNESS_FILE, MANIFEST_FILE)


class BigInt(int):
    """Integer serialized as a decimal string"""

    @classmethod
    def __get_pydantic_core_schema__(cls, source_type, handler):
        """Accept ints or decimal strings, always write strings"""
        from pydantic_core import core_schema

        def validate_bigint(value):
            if isinstance(value, bool):
                raise ValueError("booleans are not integers")
            if isinstance(value, int):
                return int(value)
            if isinstance(value, str) and value.strip().lstrip("-").isdigit():
                return int(value.strip())
            raise ValueError(f"expected an integer or a decimal string, got {value!r}")

        python_schema = core_schema.no_info_plain_validator_function(validate_bigint)
        return core_schema.json_or_python_schema(
            json_schema=python_schema,
            python_schema=python_schema,
            serialization=core_schema.plain_serializer_function_ser_schema(
                lambda x: str(x),
                return_schema=core_schema.str_schema(),
            ),
        )


class ExactRational(Fraction):
    """Rational serialized as "p/q" (or "p" when integral)"""

    @classmethod
    def __get_pydantic_core_schema__(cls, source_type, handler):
        """Accept Fractions, ints and "p/q" strings"""
        from pydantic_core import core_schema

        def validate_rational(value):
            if isinstance(value, bool):
                raise ValueError("booleans are not rationals")
            if isinstance(value, (int, Fraction)):
                return Fraction(value)
            if isinstance(value, str):
                try:
                    return Fraction(value.strip())
                except (ValueError, ZeroDivisionError):
                    pass
            raise ValueError(f"expected a rational like '3/4', got {value!r}")

        python_schema = core_schema.no_info_plain_validator_function(validate_rational)
        return core_schema.json_or_python_schema(
            json_schema=python_schema,
            python_schema=python_schema,
            serialization=core_schema.plain_serializer_function_ser_schema(
                lambda x: str(x),
                return_schema=core_schema.str_schema(),
            ),
        )


IntMatrix = List[List[BigInt]]
RationalMatrix = List[List[ExactRational]]


class LevelModel(BaseModel):
    moduli: List[BigInt]
    lower: Optional[List[BigInt]] = None
    shape: Optional[List[BigInt]] = None
    points: Optional[List[List[int]]] = None


class ChainModel(BaseModel):
    dim: int = Field(ge=1)
    levels: List[LevelModel]


class SequenceModel(BaseModel):
    p: List[BigInt]
    matrices: List[IntMatrix]


class MatricesModel(BaseModel):
    p: List[BigInt]
    managed: List[IntMatrix]
    augmented: List[IntMatrix]


class SparseArrangementModel(BaseModel):
    """Rule for the labels of a level too large to list"""
    counts: List[List[BigInt]]
    rank: BigInt
    shuffle: Optional[List[BigInt]] = None


class BlocksModel(BaseModel):
    alphabet_size: int = Field(ge=1)
    seed: Optional[int] = None
    block_counts: List[int]
    materialized: List[bool]
    arrangements: List[List[Union[List[int], SparseArrangementModel]]]


class CheckModel(BaseModel):
    name: str
    passed: bool
    level: Optional[int] = None
    location: Optional[List[Any]] = None
    detail: str = ""


class ReportModel(BaseModel):
    title: str
    passed: bool
    checks: List[CheckModel]


class ReportsModel(RootModel[Dict[str, ReportModel]]):
    pass


class FactorModel(BaseModel):
    level: int
    S: IntMatrix
    T: IntMatrix
    S_next: IntMatrix


class WitnessModel(BaseModel):
    passed: bool
    factors: List[FactorModel]
    checks: List[CheckModel]
    vertices: List[List[List[ExactRational]]] = Field(default_factory=list)


class SimplexSpecModel(BaseModel):
    kind: Literal["finite", "stagewise"]
    d: Optional[int] = None
    matrices: List[RationalMatrix] = Field(default_factory=list)


class ManifestModel(BaseModel):
    format: int = FORMAT_VERSION
    version: str = __version__
    kind: str
    dim: int
    seed: Optional[int] = None
    levels: int
    passed: bool
    files: List[str] = Field(default_factory=lambda: list(BUNDLE_FILES))
    spec: Optional[SimplexSpecModel] = None
    approximant: Optional[SequenceModel] = None
    source: Optional[SequenceModel] = None
    source_indices: List[int] = Field(default_factory=list)


def _matrix(m: Matrix) -> IntMatrix:
    return [list(row) for row in m]


def _sequence_model(seq: ManagedSequence) -> SequenceModel:
    return SequenceModel(p=list(seq.p), matrices=[_matrix(m) for m in seq.mats])


def _check_model(c: Check) -> CheckModel:
    return CheckModel(**c.to_dict())


def _report_model(r: Report) -> ReportModel:
    return ReportModel(title=r.title, passed=r.passed, checks=[_check_model(c) for c in r.checks])


def _spec_model(spec: SimplexSpec) -> SimplexSpecModel:
    return SimplexSpecModel(kind=spec.kind, d=spec.d, matrices=[[list(row) for row in m] for m in spec.matrices])


def _spec_from_model(model: SimplexSpecModel) -> SimplexSpec:
    if model.kind == FINITE:
        return SimplexSpec.finite(model.d)
    return SimplexSpec.stagewise(model.matrices)


def chain_model(chain: LatticeChain) -> ChainModel:
    levels = []
    for lv in chain.levels:
        if lv.domain.is_box:
            levels.append(LevelModel(moduli=list(lv.moduli), lower=list(lv.domain.lower), shape=list(lv.domain.shape)))
        else:
            levels.append(LevelModel(moduli=list(lv.moduli), points=[list(x) for x in lv.domain.points]))
    return ChainModel(dim=chain.dim, levels=levels)


def chain_from_model(model: ChainModel) -> LatticeChain:
    levels = []
    for i, lv in enumerate(model.levels):
        if len(lv.moduli) != model.dim:
            raise BundleFormatError(f"Level {i} has {len(lv.moduli)} moduli for dimension {model.dim}")
        if lv.shape is not None and lv.lower is not None:
            domain = Domain.box(lv.lower, lv.shape)
        elif lv.points is not None:
            domain = Domain.from_elements(lv.points, dim=model.dim)
        else:
            raise BundleFormatError(f"Level {i} has neither a box nor a point list")
        levels.append(ChainLevel(Lattice(tuple(lv.moduli)), domain))
    if not levels:
        raise BundleFormatError("Chain has no levels")
    return LatticeChain(tuple(levels))


def _arrangement_model(labels: Arrangement) -> Union[List[int], SparseArrangementModel]:
    if isinstance(labels, SparseArrangement):
        return SparseArrangementModel(
            counts=[list(pair) for pair in labels.counts],
            rank=labels.rank,
            shuffle=list(labels.shuffle) if labels.shuffle is not None else None,
        )
    return list(labels)


def _arrangement_from_model(entry: Union[List[int], SparseArrangementModel], where: str) -> Arrangement:
    if not isinstance(entry, SparseArrangementModel):
        return tuple(entry)
    if any(len(pair) != 2 for pair in entry.counts):
        raise BundleFormatError(f"'{BLOCKS_FILE}' arrangement {where} has counts that are not (label, count) pairs")
    if entry.shuffle is not None and len(entry.shuffle) != 2:
        raise BundleFormatError(f"'{BLOCKS_FILE}' arrangement {where} has a shuffle that is not (a, c)")
    return SparseArrangement(
        tuple(tuple(pair) for pair in entry.counts),
        entry.rank,
        tuple(entry.shuffle) if entry.shuffle is not None else None,
    )


def witness_model(witness: Witness, managed: ManagedSequence) -> WitnessModel:
    vertices = [sorted(simplex_vertices(managed, s).vertices) for s in range(len(managed.mats))]
    factors = [FactorModel(level=f["level"], S=_matrix(f["S"]), T=_matrix(f["T"]), S_next=_matrix(f["S_next"]))
               for f in witness.factors]
    return WitnessModel(
        passed=witness.passed,
        factors=factors,
        checks=[_check_model(c) for c in witness.report.checks],
        vertices=[[list(v) for v in stage] for stage in vertices],
    )


def _write(path: Path, model: BaseModel) -> None:
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")


def _read(path: Path, model: type) -> Any:
    if not path.exists():
        raise BundleFormatError(f"Bundle file '{path.name}' is missing from {path.parent}")
    try:
        return model.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(x) for x in first["loc"])
        raise BundleFormatError(f"'{path.name}' is malformed at {where or 'top level'}: {first['msg']}") from e


def save_bundle(bundle: SystemBundle, directory: Union[str, Path]) -> Path:
    """Write the six bundle files; identical bundles give identical bytes"""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    witness = bundle.witness or ordered_group_witness(bundle.managed, bundle.augmented, strict=False)
    family = bundle.blocks
    _write(out / CHAIN_FILE, chain_model(bundle.chain))
    _write(out / MATRICES_FILE, MatricesModel(
        p=list(bundle.managed.p),
        managed=[_matrix(m) for m in bundle.managed.mats],
        augmented=[_matrix(m) for m in bundle.augmented.mats],
    ))
    _write(out / BLOCKS_FILE, BlocksModel(
        alphabet_size=family.alphabet_size,
        seed=family.seed,
        block_counts=[family.block_count(n) for n in range(family.levels)],
        materialized=[family.materialized(n) for n in range(family.levels)],
        arrangements=[[_arrangement_model(a) for a in level] for level in family.arrangements],
    ))
    _write(out / REPORTS_FILE, ReportsModel({key: _report_model(r) for key, r in bundle.reports.items()}))
    _write(out / WITNESS_FILE, witness_model(witness, bundle.managed))
    _write(out / MANIFEST_FILE, ManifestModel(
        kind=bundle.kind,
        dim=bundle.dim,
        seed=bundle.seed,
        levels=len(bundle.chain),
        passed=bundle.passed,
        spec=_spec_model(bundle.spec) if bundle.spec is not None else None,
        approximant=_sequence_model(bundle.approximant) if bundle.approximant is not None else None,
        source=_sequence_model(bundle.source) if bundle.source is not None else None,
        source_indices=list(bundle.source_indices),
    ))
    logger.info("bundle written to %s", out)
    return out


def _stored_reports(path: Path) -> Dict[str, Report]:
    reports = {}
    for key, model in _read(path, ReportsModel).root.items():
        report = Report(model.title)
        for c in model.checks:
            location = tuple(c.location) if c.location is not None else None
            report.add(c.name, c.passed, c.level, location, c.detail)
        reports[key] = report
    return reports


def load_bundle(directory: Union[str, Path], settings: Optional[ForgeSettings] = None) -> SystemBundle:
    """Rebuild a bundle from disk; reports are the stored ones until re-verified"""
    path = Path(directory)
    if not path.is_dir():
        raise BundleFormatError(f"Bundle directory '{path}' does not exist")
    settings = settings or ForgeSettings.load()
    manifest = _read(path / MANIFEST_FILE, ManifestModel)
    if manifest.format != FORMAT_VERSION:
        raise BundleFormatError(f"Bundle format {manifest.format} is not supported (expected {FORMAT_VERSION})")
    chain = chain_from_model(_read(path / CHAIN_FILE, ChainModel))
    matrices = _read(path / MATRICES_FILE, MatricesModel)
    blocks = _read(path / BLOCKS_FILE, BlocksModel)
    managed = ManagedSequence.of(matrices.p, matrices.managed)
    augmented = ManagedSequence.of(matrices.p, matrices.augmented)
    arrangements = tuple(
        tuple(_arrangement_from_model(a, f"{n}.{k}") for k, a in enumerate(level))
        for n, level in enumerate(blocks.arrangements)
    )
    try:
        family = assemble_family(chain, augmented, blocks.alphabet_size, arrangements, blocks.seed, settings)
    except ForgeError as e:
        # verify_bundle reports what is broken; keep the arrangements as stored
        logger.warning("blocks in %s do not assemble (%s); left unmaterialized", path, e)
        family = BlockFamily(chain, augmented, blocks.alphabet_size, arrangements, (None,) * len(chain), blocks.seed)
    spec = _spec_from_model(manifest.spec) if manifest.spec is not None else None
    approximant = None
    if manifest.approximant is not None:
        approximant = ManagedSequence.of(manifest.approximant.p, manifest.approximant.matrices)
    source = None
    if manifest.source is not None:
        source = ManagedSequence.of(manifest.source.p, manifest.source.matrices)
    return SystemBundle(
        kind=manifest.kind,
        chain=chain,
        managed=managed,
        augmented=augmented,
        blocks=family,
        reports=_stored_reports(path / REPORTS_FILE),
        spec=spec,
        approximant=approximant,
        source=source,
        source_indices=tuple(manifest.source_indices),
        seed=manifest.seed,
    )


def load_simplex_spec(path: Union[str, Path]) -> SimplexSpec:
    """Stagewise or finite simplex description from JSON"""
    path = Path(path)
    if not path.is_file():
        raise InputInvalidError(f"Simplex file '{path}' does not exist")
    try:
        model = SimplexSpecModel.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise InputInvalidError(f"Simplex file '{path}' is invalid: {e.errors()[0]['msg']}") from e
    if model.kind == STAGEWISE and not model.matrices:
        raise InputInvalidError(f"Simplex file '{path}' declares a stagewise simplex without matrices")
    return _spec_from_model(model)


def load_sequence(path: Union[str, Path]) -> Tuple[List[int], List[Matrix]]:
    """Period chain and matrices of a managed Z presentation"""
    path = Path(path)
    if not path.is_file():
        raise InputInvalidError(f"Sequence file '{path}' does not exist")
    try:
        model = SequenceModel.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise InputInvalidError(f"Sequence file '{path}' is invalid: {e.errors()[0]['msg']}") from e
    return list(model.p), [tuple(tuple(row) for row in m) for m in model.matrices]


def save_sequence(seq: ManagedSequence, path: Union[str, Path]) -> Path:
    path = Path(path)
    _write(path, _sequence_model(seq))
    return path


def window_points(d: int, radius: int) -> List[Tuple[int, ...]]:
    if radius < 0:
        raise InputInvalidError(f"Window radius must be nonnegative, got {radius}")
    return list(itertools.product(range(-radius, radius + 1), repeat=d))


def emit_window(bundle: SystemBundle, radius: int, directory: Union[str, Path],
                fmt: str = "auto", stem: str = "window") -> List[Path]:
    """x0 on [-radius, radius]^d as CSV rows (coordinates, symbol), plus a PGM for d = 2.

    PGM files are plain (P2) with maxval 255; symbol s maps to gray
    (s - 1) * 255 // (l_0 - 1), so block 1 is black and l_0 is white.
    """
    if fmt not in ("auto", "csv", "pgm"):
        raise InputInvalidError(f"Unknown window format '{fmt}'; expected auto, csv or pgm")
    d = bundle.dim
    if fmt == "pgm" and d != 2:
        raise InputInvalidError(f"PGM output needs a 2-dimensional group, bundle is on Z^{d}")
    points = window_points(d, radius)
    values = evaluate_x0(bundle.blocks, points)
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("auto", "csv"):
        csv_path = out / f"{stem}.csv"
        with csv_path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow([f"x{i + 1}" for i in range(d)] + ["symbol"])
            for g in points:
                writer.writerow(list(g) + [values[g]])
        written.append(csv_path)
    if d == 2 and fmt in ("auto", "pgm"):
        side = 2 * radius + 1
        top = max(bundle.blocks.alphabet_size - 1, 1)
        lines = ["P2", f"# x0 on [-{radius}, {radius}]^2", f"{side} {side}", "255"]
        for a in range(-radius, radius + 1):
            lines.append(" ".join(str((values[(a, b)] - 1) * 255 // top) for b in range(-radius, radius + 1)))
        pgm_path = out / f"{stem}.pgm"
        pgm_path.write_text("\n".join(lines) + "\n", encoding="ascii")
        written.append(pgm_path)
    logger.debug("window of radius %d written to %s", radius, out)
    return written
