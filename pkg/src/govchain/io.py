"""File formats: ballots, election configs, results, scenarios, chains, metrics."""

from __future__ import annotations

import csv
import io as _io
import json
from typing import Iterable

from .election import Ballot, CommitteeResult, ElectionConfig, ElectionError
from .simnet import Scenario, ScenarioError

METRICS_COLUMNS = (
    "epoch",
    "start_height",
    "committee_size",
    "downtime_sim",
    "blocks_in_epoch",
    "txs_committed",
    "instances_in_epoch",
)


class InputError(ValueError):
    """Malformed input file; the message carries the file and line number."""


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def read_ballots(path: str) -> list:
    ballots = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or not isinstance(obj.get("voter"), str):
                raise InputError(f"{path}:{lineno}: expected an object with a string 'voter'")
            prefs = obj.get("prefs")
            if not isinstance(prefs, list) or not all(isinstance(p, str) for p in prefs):
                raise InputError(f"{path}:{lineno}: 'prefs' must be a list of strings")
            ballots.append(Ballot(obj["voter"], tuple(prefs)))
    return ballots


def write_ballots(path: str, ballots: Iterable[Ballot]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for b in ballots:
            fh.write(json.dumps(b.to_dict(), separators=(",", ":")) + "\n")


def config_from_dict(obj, quota_mode=None, transfer=None, where: str = "config") -> ElectionConfig:
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected a JSON object")
    missing = [key for key in ("n", "t", "k", "candidates") if key not in obj]
    if missing:
        raise InputError(f"{where}: missing keys {missing}")
    try:
        return ElectionConfig(
            n=int(obj["n"]),
            t=int(obj["t"]),
            k=int(obj["k"]),
            candidates=tuple(obj["candidates"]),
            voters=tuple(obj["voters"]) if obj.get("voters") is not None else None,
            quota_mode=quota_mode or obj.get("quota", "exact"),
            transfer=transfer or obj.get("transfer", "weighted"),
        )
    except (ElectionError, TypeError, ValueError) as exc:
        raise InputError(f"{where}: {exc}") from None


def read_config(path: str, quota_mode=None, transfer=None) -> ElectionConfig:
    return config_from_dict(_load_json(path), quota_mode, transfer, where=path)


def write_config(path: str, config: ElectionConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")


def result_json(result: CommitteeResult, **extra) -> str:
    obj = result.to_dict()
    obj.update(extra)
    return json.dumps(obj, sort_keys=False)


def read_scenario(path: str) -> Scenario:
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise InputError(f"{path}: expected a JSON object")
    try:
        return Scenario.from_dict(obj)
    except (ScenarioError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def write_scenario(path: str, scenario: Scenario) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_genesis(path: str, genesis: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(genesis, fh, indent=2, sort_keys=True)
        fh.write("\n")


def metrics_csv(rows: Iterable[dict]) -> str:
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=METRICS_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in METRICS_COLUMNS})
    return buf.getvalue()
