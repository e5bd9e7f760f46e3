"""Robustness grid: embed -> attack -> extract over images x attacks x strengths."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .attacks import KINDS, AttackSpec, apply_attack
from .codec import embed, random_message
from .config import RunConfig
from .decoder import extract
from .errors import SpecMarkError
from .metrics import PerfCurve, aggregate, bra, psnr, ssim

COLUMNS = ("image", "attack", "strength", "psnr", "ssim", "bra", "error")


def cell_seed(seed: int, image_index: int, attack: str, strength: float) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, image_index, KINDS.index(attack), int(round(strength * 1_000_000))])


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def run_cell(name, index, img, attack, strength, cfg, model, seed) -> dict:
    ss = cell_seed(seed, index, attack, strength)
    msg_seed, atk_seed = ss.spawn(2)
    row = {"image": name, "attack": attack, "strength": strength,
           "psnr": None, "ssim": None, "bra": None, "error": ""}
    try:
        msg = random_message(cfg.bit_length, np.random.default_rng(msg_seed))
        marked = embed(img, msg, cfg, model)
        spec = AttackSpec(attack, strength, int(atk_seed.generate_state(1)[0]))
        attacked = apply_attack(marked, spec)
        row["psnr"] = psnr(img, attacked)
        row["ssim"] = ssim(img, attacked)
        row["bra"] = bra(msg, extract(attacked, cfg, model).bits)
    except (SpecMarkError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def run_grid(images, names, cfg: RunConfig, model, attacks, strengths, seed: int = 0,
             threads: int | None = None) -> list[dict]:
    for a in attacks:
        if a not in KINDS:
            raise SpecMarkError(f"unknown attack kind {a!r}")
    cells = [(names[i], i, img, a, float(x))
             for i, img in enumerate(images) for a in attacks for x in strengths]
    if threads is None:
        threads = int(os.environ.get("SPECMARK_THREADS", "1") or 1)

    def work(c):
        return run_cell(*c, cfg, model, seed)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(work, cells))
    return [work(c) for c in cells]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(COLUMNS)
    for r in rows:
        wr.writerow([r["image"], r["attack"], _fmt(r["strength"]), _fmt(r["psnr"]), _fmt(r["ssim"]),
                     _fmt(r["bra"]), r["error"]])
    return buf.getvalue()


def read_csv_rows(text: str) -> list[dict]:
    def num(s):
        return None if s == "" else float(s)

    out = []
    for r in csv.DictReader(io.StringIO(text)):
        out.append({"image": r["image"], "attack": r["attack"], "strength": float(r["strength"]),
                    "psnr": num(r["psnr"]), "ssim": num(r["ssim"]), "bra": num(r["bra"]),
                    "error": r["error"]})
    return out


def aggregate_rows(rows) -> dict:
    """Per-attack Avg P / Avg Q / Q@0.95P / Q@0.7P from grid rows.

    p is the mean BRA over images at a strength and q the mean of
    ``1 - SSIM(cover, attacked)``; errored rows are skipped.
    """
    by_attack: dict[str, dict[float, list]] = {}
    for r in rows:
        if r["error"]:
            continue
        by_attack.setdefault(r["attack"], {}).setdefault(r["strength"], []).append((r["bra"], 1.0 - r["ssim"]))
    out = {}
    for attack, cells in by_attack.items():
        xs = sorted(cells)
        p = tuple(float(np.mean([c[0] for c in cells[x]])) for x in xs)
        q = tuple(float(np.mean([c[1] for c in cells[x]])) for x in xs)
        if len(xs) >= 2:
            agg = aggregate(PerfCurve(tuple(xs), p, q))
        else:
            agg = {"avg_p": p[0], "avg_q": q[0], "q_at_095p": None, "q_at_07p": None}
        out[attack] = {"avg_p": agg["avg_p"], "avg_q": agg["avg_q"],
                       "q@0.95p": agg["q_at_095p"], "q@0.7p": agg["q_at_07p"]}
    return out


def _json_safe(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    return v


def aggregates_to_json(agg: dict) -> str:
    return json.dumps(_json_safe(agg), indent=2, sort_keys=True)


def write_report(rows, out_dir) -> tuple[str, str]:
    """Write ``rows.csv`` and ``aggregate.json``; aggregates come from the CSV text."""
    os.makedirs(out_dir, exist_ok=True)
    text = rows_to_csv(rows)
    csv_path = os.path.join(out_dir, "rows.csv")
    json_path = os.path.join(out_dir, "aggregate.json")
    with open(csv_path, "w", newline="") as fh:
        fh.write(text)
    with open(json_path, "w") as fh:
        fh.write(aggregates_to_json(aggregate_rows(read_csv_rows(text))))
    return csv_path, json_path
