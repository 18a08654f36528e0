"""File formats for the pipeline: CSV tables, ndjson draws, run manifests.

Floats are written with ``repr`` (shortest round-trip decimal), so files
reload to bitwise-equal values and byte-identical reruns are possible. The
draws store is newline-delimited JSON: one header record describing the run
followed by one record per retained draw. A run directory is tied together
by ``manifest.json``; its ``run_id`` (a SHA-256 over the resolved
configuration and input digests) is stamped into every draws file so later
stages can refuse mixed lineage.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DomainError, LineageError
from .gibbs import Draws
from .model import Dataset, MRInterval, MRSpec

FORMAT_VERSION = 1


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# Datasets


def dataset_to_csv(data: Dataset, path) -> None:
    """Write a dataset; missing cells become empty fields."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(data.feature_names)
        for i in range(data.n):
            row = [
                "" if data.missing[i, j] else _fmt(data.values[i, j])
                for j in range(data.p)
            ]
            writer.writerow(row)


def dataset_from_csv(path) -> Dataset:
    """Read a dataset written by :func:`dataset_to_csv` (or any numeric CSV
    with a header row; empty cells mean missing)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty file") from None
        names = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(names):
                raise DomainError(
                    f"{path}:{lineno}: expected {len(names)} fields, got {len(row)}"
                )
            parsed = []
            for name, cell in zip(names, row):
                cell = cell.strip()
                if cell == "":
                    parsed.append(np.nan)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DomainError(
                        f"{path}:{lineno}: column {name!r} has non-numeric value {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DomainError(f"{path}: no data rows")
    return Dataset.from_values(np.asarray(rows, dtype=np.float64), feature_names=names)


def labels_to_csv(labels, path, column: str = "cluster") -> None:
    """Write 1-based cluster labels, one row per observation."""
    labels = np.asarray(labels)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", column])
        for i, lab in enumerate(labels, start=1):
            writer.writerow([i, int(lab)])


def matrix_to_csv(matrix: np.ndarray, path) -> None:
    """Write a float matrix with full-precision entries and no header."""
    matrix = np.asarray(matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# Region specs


def mrspec_to_json_dict(
    specs,
    omega: float = 0.95,
    gamma: float = 1.0,
    L: int = 10,
    variance_mode: str = "application",
) -> dict:
    features = []
    for spec in specs:
        features.append(
            {
                "name": spec.feature_name,
                "allow_overlap": spec.allow_overlap,
                "regions": [
                    {"label": r.label, "lower": r.lower, "upper": r.upper}
                    for r in spec.regions
                ],
            }
        )
    return {
        "features": features,
        "omega": omega,
        "gamma": gamma,
        "L": L,
        "variance_mode": variance_mode,
    }


def mrspec_to_json(specs, path, **options) -> None:
    with open(path, "w") as fh:
        json.dump(mrspec_to_json_dict(specs, **options), fh, indent=2)
        fh.write("\n")


def mrspec_from_json(path) -> dict:
    """Parse a region-spec file into specs plus model options.

    Returns a dict with keys ``specs`` (list of MRSpec), ``omega``,
    ``gamma``, ``L``, ``variance_mode``, and per-feature override dicts
    ``xi``, ``tau2``, ``rho`` keyed by feature name.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as err:
        raise DomainError(f"{path}: invalid JSON ({err})") from None
    if not isinstance(raw, dict) or "features" not in raw:
        raise DomainError(f"{path}: expected an object with a 'features' list")
    features = raw["features"]
    if not isinstance(features, list) or not features:
        raise DomainError(f"{path}: 'features' must be a nonempty list")
    specs = []
    xi_over: dict[str, tuple] = {}
    tau2_over: dict[str, tuple] = {}
    rho_over: dict[str, float] = {}
    for item in features:
        if not isinstance(item, dict) or "name" not in item or "regions" not in item:
            raise DomainError(f"{path}: each feature needs 'name' and 'regions'")
        name = str(item["name"])
        regions = []
        for reg in item["regions"]:
            if not isinstance(reg, dict) or "lower" not in reg or "upper" not in reg:
                raise DomainError(
                    f"{path}: feature {name!r}: each region needs 'lower' and 'upper'"
                )
            regions.append(
                MRInterval(
                    lower=float(reg["lower"]),
                    upper=float(reg["upper"]),
                    label=str(reg.get("label", "")),
                )
            )
        spec = MRSpec(
            feature_name=name,
            regions=tuple(regions),
            allow_overlap=bool(item.get("allow_overlap", False)),
        )
        specs.append(spec)
        if "xi" in item:
            xi_over[name] = tuple(float(v) for v in item["xi"])
        if "tau2" in item:
            tau2_over[name] = tuple(float(v) for v in item["tau2"])
        if "rho" in item:
            rho_over[name] = float(item["rho"])
    out = {
        "specs": specs,
        "omega": float(raw.get("omega", 0.95)),
        "gamma": float(raw.get("gamma", 1.0)),
        "L": int(raw.get("L", 10)),
        "variance_mode": str(raw.get("variance_mode", "application")),
        "xi": xi_over,
        "tau2": tau2_over,
        "rho": rho_over,
    }
    return out


# ---------------------------------------------------------------------------
# Draws store (ndjson)


def draws_to_ndjson(draws: Draws, path, run_id: str = "") -> None:
    """Write one chain's draws: a header record, then one record per draw."""
    header = {
        "record": "header",
        "format_version": FORMAT_VERSION,
        "run_id": run_id,
        "sampler": draws.sampler,
        "chain_id": draws.chain_id,
        "seed": draws.seed,
        "iterations": draws.iterations,
        "burn_in": draws.burn_in,
        "thin": draws.thin,
        "n": draws.n,
        "p": draws.p,
        "L": draws.L,
        "K": list(draws.K),
        "n_retained": draws.n_retained,
        "feature_names": list(draws.feature_names),
        "missing_idx": [[int(i), int(j)] for i, j in draws.missing_idx],
        "standardize": None
        if draws.standardize is None
        else {
            "mean": draws.standardize[0].tolist(),
            "scale": draws.standardize[1].tolist(),
        },
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for t in range(draws.n_retained):
            record = {
                "record": "draw",
                "t": t,
                "c": draws.c[t].tolist(),
                "s": draws.s[t].tolist(),
                "mu": draws.mu[t].tolist(),
                "sigma2": draws.sigma2[t].tolist(),
                "loglik": float(draws.loglik[t]),
                "imputed": draws.imputed[t].tolist(),
            }
            fh.write(json.dumps(record) + "\n")


def draws_from_ndjson(path) -> tuple[Draws, str]:
    """Load a draws file; returns the draws and the stamped run id."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DomainError(f"{path}: empty draws file")
    header = json.loads(lines[0])
    if header.get("record") != "header":
        raise DomainError(f"{path}: first record must be the header")
    n, p, ncomp = header["n"], header["p"], header["L"]
    t_ret = header["n_retained"]
    records = lines[1:]
    if len(records) != t_ret:
        raise DomainError(
            f"{path}: header promises {t_ret} draws but the file has {len(records)}"
        )
    c = np.empty((t_ret, n), dtype=np.int64)
    s = np.empty((t_ret, ncomp, p), dtype=np.int64)
    mu = np.empty((t_ret, ncomp, p))
    sigma2 = np.empty((t_ret, ncomp, p))
    loglik = np.empty(t_ret)
    missing_idx = np.asarray(header["missing_idx"], dtype=np.int64).reshape(-1, 2)
    imputed = np.empty((t_ret, missing_idx.shape[0]))
    for t, line in enumerate(records):
        try:
            rec = json.loads(line)
            c[t] = rec["c"]
            s[t] = rec["s"]
            mu[t] = rec["mu"]
            sigma2[t] = rec["sigma2"]
            loglik[t] = rec["loglik"]
            imputed[t] = rec["imputed"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DomainError(
                f"{path}: draw record {t} does not match the header: {exc}"
            ) from exc
    standardize = None
    if header["standardize"] is not None:
        standardize = (
            np.asarray(header["standardize"]["mean"]),
            np.asarray(header["standardize"]["scale"]),
        )
    draws = Draws(
        c=c,
        s=s,
        mu=mu,
        sigma2=sigma2,
        loglik=loglik,
        imputed=imputed,
        missing_idx=missing_idx,
        sampler=header["sampler"],
        chain_id=header["chain_id"],
        seed=header["seed"],
        iterations=header["iterations"],
        burn_in=header["burn_in"],
        thin=header["thin"],
        feature_names=tuple(header["feature_names"]),
        K=tuple(header["K"]),
        standardize=standardize,
    )
    return draws, header.get("run_id", "")


# ---------------------------------------------------------------------------
# Manifests


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def compute_run_id(config_snapshot: dict, input_digests: dict) -> str:
    payload = json.dumps(
        {"config": config_snapshot, "inputs": input_digests}, sort_keys=True
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def build_manifest(
    command: str,
    config_snapshot: dict,
    input_paths: dict,
    version: str,
) -> dict:
    """Assemble a manifest; the run id covers config and input digests but
    not the timestamp, so identical runs share an id."""
    digests = {name: sha256_file(p) for name, p in input_paths.items()}
    run_id = compute_run_id(config_snapshot, digests)
    return {
        "run_id": run_id,
        "command": command,
        "version": version,
        "config": config_snapshot,
        "inputs": {
            name: {"path": str(Path(p)), "sha256": digests[name]}
            for name, p in input_paths.items()
        },
        "created_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise LineageError(f"{path}: manifest not found")
    with open(path) as fh:
        manifest = json.load(fh)
    if "run_id" not in manifest:
        raise LineageError(f"{path}: manifest has no run_id")
    return manifest


def check_lineage(manifest: dict, run_id: str, source: str) -> None:
    if run_id != manifest["run_id"]:
        raise LineageError(
            f"{source} belongs to run {run_id or '<unstamped>'} "
            f"but the manifest describes run {manifest['run_id']}"
        )
