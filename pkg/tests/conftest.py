"""Shared helpers: corpus builders and the brute-force LCS oracle."""
from __future__ import annotations

import hashlib

from volcano.corpus import Corpus, SourceContract, parse_pragma
from volcano.extractor import FunctionFragment, extract_functions
from volcano.normalize import RenamingMode, in_mode, pretty_print


def make_contract(cid: str, text: str, path: str | None = None) -> SourceContract:
    return SourceContract(
        id=cid,
        source_text=text,
        content_digest=hashlib.sha256(text.encode("utf-8")).hexdigest(),
        version=parse_pragma(text),
        path=path or f"{cid}.sol",
    )


def make_corpus(label: str, sources: dict[str, str]) -> Corpus:
    return Corpus(label=label, contracts=[make_contract(cid, text) for cid, text in sources.items()])


def single_fragment(text: str, cid: str = "c") -> FunctionFragment:
    frags = extract_functions(make_contract(cid, text))
    assert len(frags) == 1, f"expected one fragment, got {[f.name for f in frags]}"
    return frags[0]


def norm(text: str, mode: RenamingMode = RenamingMode.NONE, cid: str = "c"):
    return in_mode(pretty_print(single_fragment(text, cid=cid)), mode)


def wrap(body: str, pragma: str | None = "pragma solidity ^0.4.10;") -> str:
    head = f"{pragma}\n" if pragma else ""
    return f"{head}contract C {{\n{body}\n}}\n"


def lcs_oracle(a, b) -> int:
    """Longest common subsequence by exhaustive subsequence enumeration.

    Deliberately a different route than the DP under test: every
    subsequence of the shorter sequence is generated from a bitmask and
    greedily checked against the longer one.
    """
    if len(a) > len(b):
        a, b = b, a
    n = len(a)
    best = 0
    for mask in range(1 << n):
        if mask.bit_count() <= best:
            continue
        sub = [a[i] for i in range(n) if mask >> i & 1]
        it = iter(b)
        if all(x in it for x in sub):
            best = len(sub)
    return best


def pair_key_set(pairs):
    return {(p.left.uid, p.right.uid) for p in pairs}
