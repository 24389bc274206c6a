"""Plain-text experiment configuration: sectioned key = value files.

A config file declares the spectrum, the perturbation, the drive frequency,
the exponent choice, and the truncation windows; the [run] section carries
subcommand parameters.  Every stochastic run must fix a seed (the CLI refuses
otherwise), so outputs are a pure function of (config, seed, version).
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diophantine import (
    DiophantineProfile,
    ExponentChoice,
    build_profile,
    select_exponents,
)
from .errors import ConfigError
from .perturbation import (
    FourierPerturbation,
    band_perturbation,
    counterexample_perturbation,
)
from .presets import GOLDEN_RATIO
from .spectrum import (
    FloquetGrid,
    LatticeIndex,
    SpectrumModel,
    TruncationWindow,
    power_spectrum,
    table_spectrum,
)

__all__ = ["ExperimentConfig", "load_config"]


def _parse_window(text: str) -> TruncationWindow:
    try:
        n1, n2 = text.lower().split("x")
        return TruncationWindow(int(n1), int(n2))
    except Exception as exc:
        raise ConfigError(f"bad window spec {text!r}; expected like 21x15") from exc


def _floats(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


@dataclass
class ExperimentConfig:
    """Parsed configuration plus the raw file hash for output headers."""

    parser: configparser.ConfigParser
    sha256: str
    path: str

    # -- raw access -------------------------------------------------------
    def _get(self, section: str, key: str, fallback: str | None = None) -> str:
        if not self.parser.has_section(section):
            if fallback is not None:
                return fallback
            raise ConfigError(f"missing [{section}] section in {self.path}")
        value = self.parser.get(section, key, fallback=fallback)
        if value is None:
            raise ConfigError(f"missing key {key!r} in [{section}] of {self.path}")
        return value

    def run_value(self, key: str, fallback: str | None = None) -> str:
        return self._get("run", key, fallback)

    def run_floats(self, key: str, fallback: str) -> list[float]:
        return _floats(self.run_value(key, fallback))

    def run_ints(self, key: str, fallback: str) -> list[int]:
        return _ints(self.run_value(key, fallback))

    # -- builders ---------------------------------------------------------
    def build_model(self) -> SpectrumModel:
        kind = self._get("spectrum", "kind", "power")
        if kind == "power":
            return power_spectrum(
                p=float(self._get("spectrum", "p", "2.0")),
                alpha=float(self._get("spectrum", "alpha", "1.0")),
                gap_constant=float(self._get("spectrum", "gap_constant", "1.5")),
                mult_constant=float(self._get("spectrum", "mult_constant", "1.0")),
                mult_exponent=float(self._get("spectrum", "mult_exponent", "2.0")),
            )
        if kind == "table":
            values = _floats(self._get("spectrum", "values"))
            return table_spectrum(
                values,
                alpha=float(self._get("spectrum", "alpha", "1.0")),
                gap_constant=float(self._get("spectrum", "gap_constant", "1.0")),
            )
        raise ConfigError(f"unknown spectrum kind {kind!r} (power|table)")

    def build_grid(self, model: SpectrumModel | None = None) -> FloquetGrid:
        model = model if model is not None else self.build_model()
        omega = float(self._get("frequency", "omega", repr(GOLDEN_RATIO)))
        eta = _ints(self._get("run", "eta", "0 1"))
        if len(eta) != 2:
            raise ConfigError("eta must be two integers 'n1 n2'")
        return FloquetGrid(model=model, omega=omega, eta=LatticeIndex(eta[0], eta[1]))

    def omega_scan(self) -> np.ndarray | None:
        """Frequency scan grid when omega_min/omega_max are configured."""
        if not self.parser.has_option("frequency", "omega_min"):
            return None
        lo = float(self._get("frequency", "omega_min"))
        hi = float(self._get("frequency", "omega_max"))
        count = int(self._get("frequency", "omega_samples", "16"))
        return np.linspace(lo, hi, count)

    def build_perturbation(self, model: SpectrumModel, omega: float
                           ) -> FourierPerturbation:
        kind = self._get("perturbation", "kind", "band")
        if kind == "band":
            return band_perturbation(
                amplitude=float(self._get("perturbation", "amplitude", "0.12")),
                band_limit=int(self._get("perturbation", "band_limit", "1")),
                spatial_decay=float(self._get("perturbation", "spatial_decay", "2.0")),
                include_k0=self.parser.getboolean(
                    "perturbation", "include_k0", fallback=True
                ),
            )
        if kind == "counterexample":
            return counterexample_perturbation(model, omega)
        if kind == "table":
            table: dict[tuple[int, int, int], float] = {}
            for quad in self._get("perturbation", "entries").split(";"):
                toks = quad.split()
                if not toks:
                    continue
                if len(toks) != 4:
                    raise ConfigError(f"table entry {quad!r} is not 'k p q value'")
                k, p, q = int(toks[0]), int(toks[1]), int(toks[2])
                table[(k, p, q)] = float(toks[3])
                table.setdefault((-k, q, p), float(toks[3]))
            band = max(abs(k) for k, _, _ in table)

            def coeff(k: int, p: int, q: int) -> complex:
                return table.get((k, p, q), 0.0)

            return FourierPerturbation(
                coeff=coeff, smoothness=64, band_limit=band,
                label="table", is_real=True,
            )
        raise ConfigError(f"unknown perturbation kind {kind!r} (band|counterexample|table)")

    def main_window(self) -> TruncationWindow:
        return _parse_window(self._get("windows", "main", "21x15"))

    def window_ladder(self) -> list[TruncationWindow]:
        text = self._get("windows", "ladder", self._get("windows", "main", "21x15"))
        return [_parse_window(tok) for tok in text.replace(",", " ").split()]

    def _exponent_args(self) -> tuple[int, int | None]:
        r = int(self._get("exponents", "r", "20"))
        ell_raw = self._get("exponents", "ell", "auto")
        ell = None if ell_raw.strip() == "auto" else int(ell_raw)
        return r, ell

    def exponent_choice(self, alpha: float) -> ExponentChoice:
        r, ell = self._exponent_args()
        return select_exponents(r, alpha, ell)

    def build_profile(self, grid: FloquetGrid, window: TruncationWindow
                      ) -> DiophantineProfile:
        r, ell = self._exponent_args()
        return build_profile(grid, r=r, window=window, ell=ell)

    def seed(self, override: int | None = None) -> int:
        if override is not None:
            return override
        raw = self.parser.get("run", "seed", fallback=None)
        if raw is None:
            raise ConfigError("stochastic runs need a seed ([run] seed = N or --seed)")
        return int(raw)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    raw = path.read_bytes()
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(raw.decode("utf-8"))
    except (UnicodeDecodeError, configparser.Error) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return ExperimentConfig(
        parser=parser,
        sha256=hashlib.sha256(raw).hexdigest(),
        path=str(path),
    )
