"""Generate the bundled synthetic stand-in datasets.

The public effort datasets cannot be fetched in this environment, so each
bundled CSV is a seeded synthetic table with the same shape, column names
and per-column min/max as the original, and roughly matching means and
standard deviations. Columns share a latent project-size factor so effort
is predictable from the features to a realistic degree.

Usage: python tools/make_standin_datasets.py [OUT_DIR]
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

SEED = 20180118


@dataclass(frozen=True)
class Col:
    name: str
    lo: float
    hi: float
    mean: float
    std: float
    integer: bool = True
    load: float = 0.6  # correlation of the column's latent with the size factor
    link: str | None = None  # follow another column's latent instead
    rho: float = 0.97


def _beta_params(c: Col) -> tuple[float, float]:
    span = c.hi - c.lo
    m = min(max((c.mean - c.lo) / span, 0.01), 0.99)
    v = (c.std / span) ** 2
    total = max(m * (1 - m) / max(v, 1e-9) - 1.0, 0.2)
    return m * total, (1 - m) * total


def _quantiles(c: Col, u: np.ndarray) -> np.ndarray:
    """Beta marginal on [lo, hi], or a truncated shifted lognormal for skewed columns."""
    excess = c.mean - c.lo
    if excess > 0 and c.std / excess > 0.5:
        s2 = np.log1p((c.std / excess) ** 2)
        dist = stats.lognorm(np.sqrt(s2), scale=np.exp(np.log(excess) - s2 / 2))
        u = u * dist.cdf(c.hi - c.lo)
        return c.lo + dist.ppf(u)
    a, b = _beta_params(c)
    return c.lo + (c.hi - c.lo) * stats.beta.ppf(u, a, b)


def _marginal(c: Col, latent: np.ndarray) -> np.ndarray:
    values = _quantiles(c, stats.norm.cdf(latent))
    if c.integer:
        values = np.round(values)
    values = np.clip(values, c.lo, c.hi)
    # pin the extremes so min/max match exactly
    values[np.argmin(latent)] = c.lo
    values[np.argmax(latent)] = c.hi
    return values


def generate(n: int, cols: list[Col], effort: Col, rng: np.random.Generator) -> dict[str, np.ndarray]:
    z = rng.standard_normal(n)
    latents = {"effort": 0.85 * z + np.sqrt(1 - 0.85**2) * rng.standard_normal(n)}
    out: dict[str, np.ndarray] = {}
    for c in cols + [effort]:
        if c is effort:
            lat = latents["effort"]
        elif c.link is not None:
            lat = c.rho * latents[c.link] + np.sqrt(1 - c.rho**2) * rng.standard_normal(n)
        else:
            lat = c.load * z + np.sqrt(1 - c.load**2) * rng.standard_normal(n)
        latents[c.name] = lat
        out[c.name] = _marginal(c, lat)
    return out


def _ordinal(name: str, lo: int, hi: int, mean: float, std: float) -> Col:
    return Col(name, lo, hi, mean, std, load=0.2)


DATASETS: dict[str, tuple[int, list[Col], Col]] = {
    "kemerer": (
        15,
        [
            _ordinal("Langu", 1, 3, 1.2, 0.6),
            _ordinal("Hdware", 1, 6, 2.3, 1.7),
            Col("Duration", 5, 31, 14.3, 7.5, load=0.5),
            Col("KSLOC", 39, 450, 186.6, 136.8, load=0.7),
            Col("AdjFP", 100, 2307, 999.1, 589.6, load=0.8),
            Col("RAWFP", 97, 2284, 993.9, 597.4, link="AdjFP", rho=0.99),
        ],
        Col("effort", 23, 1107, 219.2, 263.1),
    ),
    "albrecht": (
        24,
        [
            Col("Input", 7, 193, 40.2, 36.9, load=0.7),
            Col("Output", 12, 150, 47.2, 35.2, load=0.7),
            Col("Inquiry", 0, 75, 16.9, 19.3, load=0.5),
            Col("File", 3, 60, 17.4, 15.5, load=0.6),
            Col("FPAdj", 0.75, 1.25, 1.0, 0.1, integer=False, load=0.1),
            Col("RawFPs", 190, 1902, 638.5, 452.7, load=0.85),
        ],
        Col("effort", 0.5, 105, 21.9, 28.4, integer=False),
    ),
    "isbsg10": (
        37,
        [
            _ordinal("UFP", 1, 2, 1.2, 0.4),
            _ordinal("IS", 1, 10, 3.2, 3.0),
            _ordinal("DP", 1, 5, 2.6, 1.1),
            _ordinal("LT", 1, 3, 1.6, 0.8),
            _ordinal("PPL", 1, 14, 5.1, 4.1),
            _ordinal("CA", 1, 2, 1.1, 0.3),
            Col("FS", 44, 1371, 343.8, 304.2, load=0.75),
            _ordinal("RS", 1, 4, 1.7, 0.9),
            _ordinal("FPS", 1, 5, 3.5, 0.7),
            _ordinal("aux_1", 1, 3, 2.0, 0.8),
            _ordinal("aux_2", 1, 3, 2.0, 0.8),
        ],
        Col("effort", 87, 14453, 2959, 3518),
    ),
    "finnish": (
        38,
        [
            _ordinal("hw", 1, 3, 1.3, 0.6),
            _ordinal("at", 1, 5, 2.2, 1.5),
            Col("FP", 65, 1814, 763.6, 510.8, load=0.8),
            Col("co", 2, 10, 6.3, 2.7, load=0.3),
            Col("prod", 1, 29, 10.1, 7.1, load=-0.3),
            Col("lnsize", 4, 8, 6.4, 0.8, integer=False, link="FP", rho=0.98),
            Col("lneff", 6, 10, 8.4, 1.2, integer=False, link="effort", rho=0.98),
        ],
        Col("effort", 460, 26670, 7678, 7135),
    ),
    "miyazaki": (
        48,
        [
            Col("KLOC", 7, 390, 63.4, 71.9, load=0.8),
            Col("SCRN", 0, 150, 28.4, 30.4, load=0.6),
            Col("FORM", 0, 76, 20.9, 18.1, load=0.5),
            Col("FILE", 2, 100, 27.7, 20.4, load=0.6),
            Col("ESCRN", 0, 2113, 473.0, 514.3, link="SCRN", rho=0.9),
            Col("EFORM", 0, 1566, 447.1, 389.6, link="FORM", rho=0.9),
            Col("EFILE", 57, 3800, 936.6, 709.4, link="FILE", rho=0.9),
        ],
        Col("effort", 6, 340, 55.6, 60.1),
    ),
    "maxwell": (
        62,
        [
            _ordinal("App", 1, 5, 2.4, 1.0),
            _ordinal("Har", 1, 5, 2.6, 1.0),
            _ordinal("Dba", 0, 4, 1.0, 0.4),
            _ordinal("Ifc", 1, 2, 1.9, 0.2),
            _ordinal("Source", 1, 2, 1.9, 0.3),
            _ordinal("Telon", 0, 1, 0.2, 0.4),
            _ordinal("Nlan", 1, 4, 2.5, 1.0),
            _ordinal("T01", 1, 5, 3.0, 1.0),
            _ordinal("T02", 1, 5, 3.0, 0.7),
            _ordinal("T03", 2, 5, 3.0, 0.9),
            _ordinal("T04", 2, 5, 3.2, 0.7),
            _ordinal("T05", 1, 5, 3.0, 0.7),
            _ordinal("T06", 1, 4, 2.9, 0.7),
            _ordinal("T07", 1, 5, 3.2, 0.9),
            _ordinal("T08", 2, 5, 3.8, 1.0),
            _ordinal("T09", 2, 5, 4.1, 0.7),
            _ordinal("T10", 2, 5, 3.6, 0.9),
            _ordinal("T11", 2, 5, 3.4, 1.0),
            _ordinal("T12", 2, 5, 3.8, 0.7),
            _ordinal("T13", 1, 5, 3.1, 1.0),
            _ordinal("T14", 1, 5, 3.3, 1.0),
            Col("Duration", 4, 54, 17.2, 10.7, load=0.6),
            Col("Size", 48, 3643, 673.3, 784.1, load=0.85),
            _ordinal("Time", 1, 9, 5.6, 2.1),
            _ordinal("Syear", 1985, 1993, 1989.0, 2.2),
        ],
        Col("effort", 583, 63694, 8223, 10500),
    ),
    "desharnais": (
        77,
        [
            Col("TeamExp", 0, 4, 2.3, 1.3, load=0.1),
            Col("MngExp", 0, 7, 2.6, 1.5, load=0.1),
            Col("Length", 1, 36, 11.3, 6.8, load=0.6),
            Col("Transactions", 9, 886, 177.5, 146.1, load=0.7),
            Col("Entities", 7, 387, 120.5, 86.1, load=0.6),
            Col("AdjPts", 73, 1127, 298.0, 182.3, load=0.85),
        ],
        Col("effort", 546, 23940, 4834, 4188),
    ),
    "kitchenham": (
        145,
        [
            _ordinal("code", 1, 6, 2.1, 0.9),
            _ordinal("type", 0, 6, 2.4, 0.9),
            Col("duration", 37, 946, 206.4, 134.1, load=0.6),
            Col("fun_pts", 15, 18137, 527.7, 1522, load=0.8),
            Col("estimate", 121, 79870, 2856, 6789, link="effort", rho=0.95),
            _ordinal("esti_mtd", 1, 5, 2.5, 0.9),
        ],
        Col("effort", 219, 113930, 3113, 9598),
    ),
    "china": (
        499,
        [
            Col("ID", 1, 499, 250.0, 144.2, load=0.0),
            Col("AFP", 9, 17518, 486.9, 1059, load=0.85),
            Col("Input", 0, 9404, 167.1, 486.3, link="AFP", rho=0.85),
            Col("Output", 0, 2455, 113.6, 221.3, link="AFP", rho=0.8),
            Col("Enquiry", 0, 952, 61.6, 105.4, link="AFP", rho=0.7),
            Col("File", 0, 2955, 91.2, 210.3, link="AFP", rho=0.8),
            Col("Interface", 0, 1572, 24.2, 85.0, link="AFP", rho=0.5),
            Col("Added", 0, 13580, 360.4, 829.8, link="AFP", rho=0.85),
            Col("Changed", 0, 5193, 85.1, 290.9, load=0.3),
            Col("Deleted", 0, 2657, 12.4, 124.2, load=0.1),
            Col("PDR_A", 0, 84, 11.8, 12.1, load=0.2),
            Col("PDR_U", 0, 97, 12.1, 12.8, link="PDR_A", rho=0.95),
            Col("NPDR_A", 0, 101, 13.3, 14.0, link="PDR_A", rho=0.9),
            Col("NPDU_U", 0, 108, 13.6, 14.8, link="NPDR_A", rho=0.95),
            _ordinal("Resource", 1, 4, 1.5, 0.8),
            Col("Dev.Type", 0, 0, 0.0, 0.0),
            Col("Duration", 1, 84, 8.7, 7.3, load=0.5),
            Col("N_effort", 31, 54620, 4278, 7071, link="effort", rho=0.99),
        ],
        Col("effort", 26, 54620, 3921, 6481),
    ),
}


def build(name: str, rng: np.random.Generator) -> tuple[list[str], np.ndarray]:
    n, cols, effort = DATASETS[name]
    live = [c for c in cols if c.hi > c.lo]
    values = generate(n, live, effort, rng)
    if name == "albrecht":
        values["AdjFP"] = np.round(values["RawFPs"] * values["FPAdj"])
        values["FPAdj"] = np.round(values["FPAdj"], 2)
    if name == "china":
        values["ID"] = np.arange(1, n + 1, dtype=float)
    for c in cols:
        if c.hi == c.lo:
            values[c.name] = np.full(n, c.lo)
    names = [c.name for c in cols] + (["AdjFP"] if name == "albrecht" else [])
    names.append("effort")
    return names, np.column_stack([values[c] for c in names])


def write(path: Path, names: list[str], data: np.ndarray) -> None:
    lines = [",".join(names)]
    for row in data:
        lines.append(",".join(f"{v:g}" if float(v).is_integer() else repr(round(float(v), 4)) for v in row))
    path.write_text("\n".join(lines) + "\n")


def main(argv: list[str]) -> int:
    out = Path(argv[0]) if argv else Path(__file__).resolve().parents[1] / "src" / "abetune" / "datasets"
    out.mkdir(parents=True, exist_ok=True)
    for i, name in enumerate(DATASETS):
        rng = np.random.default_rng([SEED, i])
        names, data = build(name, rng)
        write(out / f"{name}.csv", names, data)
        print(f"{name}: {data.shape[0]} rows, {data.shape[1] - 1} features")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(sys.argv[1:]))
