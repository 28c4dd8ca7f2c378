"""Incremental analysis cache for within-corpus clone detection.

The cache is one JSON file in a `.volcano-cache/` directory: normalized
fragment records keyed by content digest (so renamed or duplicated files
reuse work), the id-to-digest binding of the last run, and the clone
pairs found. incremental_scan re-extracts only contracts whose digest
changed and re-runs LCS only for pairs touching them; the result is
extensionally equal to a from-scratch analysis of the current corpus.

A cache written under a different clone configuration is an error; an
unreadable cache is treated as absent (full analysis, with a warning).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .clone_engine import CloneConfig, ClonePair, cluster_classes, lcs_length
from .corpus import Corpus, SourceContract
from .errors import CacheConfigMismatch
from .extractor import FragmentRef, extract_functions
from .normalize import (
    NormalizedFragment,
    RenamingMode,
    _digests,
    pretty_print,
    rename_blind,
    rename_consistent,
)

log = logging.getLogger(__name__)

CACHE_VERSION = 1
CACHE_FILE = "analysis.json"
DEFAULT_CACHE_DIR = ".volcano-cache"


def _fragment_records(contract: SourceContract) -> list[dict]:
    records = []
    for fragment in extract_functions(contract):
        none = pretty_print(fragment)
        records.append(
            {
                "name": fragment.name,
                "start_line": fragment.start_line,
                "end_line": fragment.end_line,
                "lines": {
                    RenamingMode.NONE.value: list(none.lines),
                    RenamingMode.BLIND.value: list(rename_blind(none).lines),
                    RenamingMode.CONSISTENT.value: list(rename_consistent(none).lines),
                },
            }
        )
    return records


def _restore(contract_id: str, record: dict, mode: RenamingMode) -> NormalizedFragment:
    lines = tuple(record["lines"][mode.value])
    return NormalizedFragment(
        origin=FragmentRef(
            contract_id=contract_id,
            start_line=record["start_line"],
            end_line=record["end_line"],
            name=record["name"],
        ),
        mode=mode,
        lines=lines,
        line_digests=_digests(lines),
    )


def _ref_record(ref: FragmentRef) -> list:
    return [ref.contract_id, ref.start_line, ref.end_line, ref.name]


def _ref_from(record) -> FragmentRef:
    return FragmentRef(record[0], record[1], record[2], record[3])


@dataclass
class AnalysisCache:
    config_digest: str
    config: dict
    contracts: dict[str, str] = field(default_factory=dict)  # id -> content digest
    fragments: dict[str, list[dict]] = field(default_factory=dict)  # digest -> records
    pairs: list[ClonePair] = field(default_factory=list)

    @classmethod
    def empty(cls, cfg: CloneConfig) -> "AnalysisCache":
        return cls(config_digest=cfg.digest(), config=cfg.to_dict())

    @classmethod
    def load(cls, cache_dir) -> "AnalysisCache | None":
        path = Path(cache_dir) / CACHE_FILE
        if not path.exists():
            return None
        try:
            blob = json.loads(path.read_text(encoding="utf-8"))
            if blob["version"] != CACHE_VERSION:
                log.warning("cache %s has version %s, ignoring it", path, blob["version"])
                return None
            pairs = [
                ClonePair(
                    left=_ref_from(p["left"]),
                    right=_ref_from(p["right"]),
                    similarity=p["lcs"] / p["max"],
                    lcs_len=p["lcs"],
                    max_len=p["max"],
                )
                for p in blob["pairs"]
            ]
            return cls(
                config_digest=blob["config_digest"],
                config=blob["config"],
                contracts=blob["contracts"],
                fragments=blob["fragments"],
                pairs=pairs,
            )
        except (OSError, ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
            log.warning("cache %s is unreadable (%s); falling back to full analysis", path, exc)
            return None

    def save(self, cache_dir) -> None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        blob = {
            "version": CACHE_VERSION,
            "config_digest": self.config_digest,
            "config": self.config,
            "contracts": self.contracts,
            "fragments": self.fragments,
            "pairs": [
                {
                    "left": _ref_record(p.left),
                    "right": _ref_record(p.right),
                    "lcs": p.lcs_len,
                    "max": p.max_len,
                }
                for p in self.pairs
            ],
        }
        path = cache_dir / CACHE_FILE
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(blob, sort_keys=True), encoding="utf-8")
        tmp.replace(path)

    def clear(self, cache_dir) -> None:
        path = Path(cache_dir) / CACHE_FILE
        if path.exists():
            path.unlink()


def fragment_index(cache: AnalysisCache, corpus: Corpus, mode: RenamingMode):
    """Normalized fragments of a corpus straight from cache records."""
    index = {}
    for contract in corpus:
        for record in cache.fragments.get(contract.content_digest, []):
            nf = _restore(contract.id, record, mode)
            index[nf.origin] = nf
    return index


def incremental_scan(cache: AnalysisCache, changed_contracts: Corpus, cfg: CloneConfig):
    """Clone pairs and classes for the current corpus, reusing cached work.

    changed_contracts is the full current corpus snapshot; the diff against
    the cache (additions, modifications, removals) is taken here by content
    digest. The cache object is updated in place to describe the current
    corpus; callers persist it with save().
    """
    if cache.config_digest != cfg.digest():
        raise CacheConfigMismatch(
            "cache was built under a different configuration; run `volcano cache clear`"
        )
    current = {c.id: c for c in changed_contracts}
    unchanged = {
        cid for cid, c in current.items() if cache.contracts.get(cid) == c.content_digest
    }

    records: dict[str, list[dict]] = {}
    for contract in changed_contracts:
        digest = contract.content_digest
        if digest in records:
            continue
        cached = cache.fragments.get(digest)
        records[digest] = cached if cached is not None else _fragment_records(contract)

    fragments = []
    for contract in changed_contracts:
        for record in records[contract.content_digest]:
            fragments.append(_restore(contract.id, record, cfg.mode))

    eligible = sorted(
        (
            nf
            for nf in fragments
            if cfg.min_lines <= len(nf.lines) and (cfg.max_lines is None or len(nf.lines) <= cfg.max_lines)
        ),
        key=lambda nf: nf.origin,
    )
    reused = [
        p
        for p in cache.pairs
        if p.left.contract_id in unchanged and p.right.contract_id in unchanged
    ]
    num, den = cfg.max_difference.numerator, cfg.max_difference.denominator
    cutoff = den - num
    fresh = []
    n = len(eligible)
    for i in range(n):
        a = eligible[i]
        a_old = a.origin.contract_id in unchanged
        da = a.line_digests
        na = len(da)
        for j in range(i + 1, n):
            b = eligible[j]
            if a_old and b.origin.contract_id in unchanged:
                continue  # covered by the cached pair set
            db = b.line_digests
            nb = len(db)
            lo, hi = (na, nb) if na <= nb else (nb, na)
            if lo * den < cutoff * hi:
                continue
            lcs = lcs_length(da, db)
            if (hi - lcs) * den <= num * hi:
                fresh.append(ClonePair(a.origin, b.origin, lcs / hi, lcs_len=lcs, max_len=hi))

    pairs = sorted(reused + fresh, key=lambda p: (p.left, p.right))
    classes = cluster_classes(pairs)

    cache.contracts = {cid: c.content_digest for cid, c in current.items()}
    cache.fragments = records
    cache.pairs = pairs
    return pairs, classes
