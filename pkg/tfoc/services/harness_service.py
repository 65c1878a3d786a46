"""
Experiment harness.

Each experiment checks its hypotheses first (Hessian blocks, weight
conditions) and refuses to run when they fail. Boundedness claims are
tested by refinement drift: the largest measured ratio per grid size must
stay within a configured factor across N.
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
import csv
import hashlib
import json
import logging
import math
import os
import time

import numpy as np
from scipy.linalg import svd

from config import Config
from tfoc.core.concurrency import parallel_map, worker_count
from tfoc.core.errors import ConfigurationError, ExperimentError, HypothesisError, TFOCError
from tfoc.models import Signal
from tfoc.services.corpus import random_amplitude_specs, random_signal_specs, random_symbol_specs
from tfoc.services.fio import (amplitude_from_symbol, amplitude_norms, fio_matrix, hessian_condition,
                               hessian_deviation, kernel_map, parse_phase)
from tfoc.services.grid import l2_norm, make_grid
from tfoc.services.modspace import (MixedNormSpec, conjugate_exponent, default_cover, embedding_refinement_report,
                                    format_exponent, lattice_equivalence_report, mod_norm, mod_norms_2d,
                                    parse_exponent, weight_domination, window_independence_report)
from tfoc.services.quantize import apply_operator, pseudomod_ratio_experiment
from tfoc.services.schatten import power_iteration_norm, schatten_norms
from tfoc.services.stft import gaussian_window, gaussian_window_2d
from tfoc.services.weights import (check_phase_weight_compat, check_weightcond1, check_weightcond2,
                                   constant_weight, kernel_side_weight, lhs_samples, parse_weight)

logger = logging.getLogger(__name__)

# Hessian block required by each case of the M1 -> Minf theorem, and the matching amplitude norm.
CASE_BLOCKS = {1: "zeta_zeta", 2: "x_zeta", 3: "y_zeta"}
CASE_NORMS = {1: "case1", 2: "case2", 3: "case3"}

WEIGHT_ROLES = {
    "M1_Minf": {"omega1": 2, "omega2": 2, "omega": 6},
    "Mp": {"omega1": 2, "omega2": 2, "omega": 6},
    "schatten_membership": {"omega": 4},
    "kernel_continuity": {"omega": 4, "omega1": 2, "omega2": 2, "v1": 1, "v2": 2},
    "pseudomod": {"omega": 4},
    "modspace": {"omega1": 2, "omega2": 2},
}

CONFIG_FIELDS = {"experiment_id", "kind", "N_list", "corpus_seed", "corpus_size", "phases", "weights",
                 "exponents", "theorem_case", "hessian_min_det", "t", "kernel_window", "tolerances"}

MIN_EXPERIMENT_POINTS = 16

# Allowed tolerance keys and whether each must be an integer.
TOLERANCE_KEYS = {"drift_factor": False, "cv": False, "lhs_points": True, "moyal": False}


def _is_integer(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_real(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _default_phases():
    return ["linear"]


def _default_exponents():
    return [[2, 2]]


@dataclass
class ExperimentConfig:
    experiment_id: str
    kind: str
    N_list: list
    corpus_seed: int = Config.SEED
    corpus_size: int = 3
    phases: list = field(default_factory=_default_phases)
    weights: dict = field(default_factory=dict)
    exponents: list = field(default_factory=_default_exponents)
    theorem_case: int = 3
    hessian_min_det: float = Config.HESSIAN_MIN_DET
    t: float = 0.0
    kernel_window: str = "matched"
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigurationError("Each experiment must be a JSON object")
        unknown = set(data) - CONFIG_FIELDS
        if unknown:
            raise ConfigurationError(f"Unknown experiment fields: {sorted(unknown)}")
        for key in ("experiment_id", "kind", "N_list"):
            if key not in data:
                raise ConfigurationError(f"Experiment is missing {key!r}")
        config = cls(**data)
        config.validate()
        return config

    def validate(self):
        if not isinstance(self.experiment_id, str) or not self.experiment_id:
            raise ConfigurationError("experiment_id must be a non-empty string")
        if self.kind not in EXPERIMENTS:
            raise ConfigurationError(f"Unknown experiment kind {self.kind!r}")
        if not isinstance(self.N_list, list) or not self.N_list:
            raise ConfigurationError(f"{self.experiment_id}: N_list must be a non-empty list")
        for n in self.N_list:
            if isinstance(n, bool) or not isinstance(n, int) or n % 2 or n < MIN_EXPERIMENT_POINTS:
                raise ConfigurationError(
                    f"{self.experiment_id}: grid sizes must be even integers >= {MIN_EXPERIMENT_POINTS}, got {n!r}")
        if self.kind == "modspace" and any(n % 4 for n in self.N_list):
            raise ConfigurationError(f"{self.experiment_id}: modspace grid sizes must be multiples of 4")
        if isinstance(self.theorem_case, bool) or self.theorem_case not in CASE_BLOCKS:
            raise ConfigurationError(f"{self.experiment_id}: theorem_case must be 1, 2 or 3")
        if not _is_integer(self.corpus_size) or self.corpus_size < 1:
            raise ConfigurationError(f"{self.experiment_id}: corpus_size must be positive")
        if not _is_integer(self.corpus_seed) or self.corpus_seed < 0:
            raise ConfigurationError(f"{self.experiment_id}: corpus_seed must be a non-negative integer")
        if not _is_real(self.t):
            raise ConfigurationError(f"{self.experiment_id}: t must be a finite number, got {self.t!r}")
        if not _is_real(self.hessian_min_det) or self.hessian_min_det < 0:
            raise ConfigurationError(
                f"{self.experiment_id}: hessian_min_det must be a non-negative number, got {self.hessian_min_det!r}")
        if self.kernel_window not in ("matched", "gaussian"):
            raise ConfigurationError(f"{self.experiment_id}: unknown kernel_window {self.kernel_window!r}")
        if not isinstance(self.phases, list) or not self.phases:
            raise ConfigurationError(f"{self.experiment_id}: phases must be a non-empty list")
        if not isinstance(self.weights, dict) or not isinstance(self.tolerances, dict):
            raise ConfigurationError(f"{self.experiment_id}: weights and tolerances must be objects")
        for key, value in self.tolerances.items():
            if key not in TOLERANCE_KEYS:
                raise ConfigurationError(f"{self.experiment_id}: unknown tolerance {key!r}")
            valid = _is_integer(value) if TOLERANCE_KEYS[key] else _is_real(value)
            if not valid or value <= 0:
                raise ConfigurationError(f"{self.experiment_id}: tolerance {key} must be positive, got {value!r}")
        if not isinstance(self.exponents, list):
            raise ConfigurationError(f"{self.experiment_id}: exponents must be a list")
        for descriptor in self.phases:
            parse_phase(descriptor)
        roles = WEIGHT_ROLES[self.kind]
        for role, descriptor in self.weights.items():
            if role not in roles:
                raise ConfigurationError(f"{self.experiment_id}: unknown weight role {role!r}")
            for item in descriptor if isinstance(descriptor, list) else [descriptor]:
                parse_weight(item, roles[role])
        try:
            pairs = self.exponent_pairs()
        except (TFOCError, TypeError, ValueError) as e:
            raise ConfigurationError(f"{self.experiment_id}: invalid exponents ({e})")
        if not pairs:
            raise ConfigurationError(f"{self.experiment_id}: exponents must not be empty")

    def exponent_pairs(self):
        pairs = []
        for item in self.exponents:
            p, q = (item, item) if not isinstance(item, (list, tuple)) else item
            pairs.append((parse_exponent(p), parse_exponent(q)))
        return pairs

    def weight(self, role, index=None):
        descriptor = self.weights.get(role, "one")
        if isinstance(descriptor, list):
            descriptor = descriptor[index or 0]
        return parse_weight(descriptor, WEIGHT_ROLES[self.kind][role])

    def weight_list(self, role):
        descriptor = self.weights.get(role, "one")
        items = descriptor if isinstance(descriptor, list) else [descriptor]
        return [parse_weight(item, WEIGHT_ROLES[self.kind][role]) for item in items]

    def tolerance(self, key, default):
        return float(self.tolerances.get(key, default))

    def to_dict(self):
        return {
            "experiment_id": self.experiment_id,
            "kind": self.kind,
            "N_list": list(self.N_list),
            "corpus_seed": self.corpus_seed,
            "corpus_size": self.corpus_size,
            "phases": list(self.phases),
            "weights": dict(self.weights),
            "exponents": [list(e) if isinstance(e, (list, tuple)) else e for e in self.exponents],
            "theorem_case": self.theorem_case,
            "hessian_min_det": self.hessian_min_det,
            "t": self.t,
            "kernel_window": self.kernel_window,
            "tolerances": dict(self.tolerances),
        }


@dataclass
class ExperimentReport:
    experiment_id: str
    kind: str
    config_hash: str
    seed: int
    status: str = "completed"
    passed: bool = False
    cases: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    diagnostic: str = None

    def to_dict(self):
        return {
            "experiment_id": self.experiment_id,
            "kind": self.kind,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "status": self.status,
            "pass": self.passed,
            "cases": self.cases,
            "summary": self.summary,
            "diagnostic": self.diagnostic,
        }


def to_jsonable(value):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(float(value.real)), to_jsonable(float(value.imag))]
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def canonical_json(value):
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(",", ":"))


def config_hash(value):
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


def safe_ratio(numerator, denominator):
    if numerator == 0.0:
        return 0.0
    if denominator == 0.0:
        return math.inf
    return float(numerator / denominator)


def drift(values):
    """max / min of per-grid maxima; 1 when every ratio vanishes."""
    values = [float(v) for v in values]
    if any(not math.isfinite(v) for v in values):
        return math.inf
    positive = [v for v in values if v > 0]
    if not positive:
        return 1.0
    if len(positive) != len(values):
        return math.inf
    return max(positive) / min(positive)


def _grid_key(n):
    return str(n)


def _require_hessian(config, phase, block):
    grid = make_grid(max(config.N_list))
    report = hessian_condition(phase, block, grid, d=config.hessian_min_det)
    if not report.passed:
        raise HypothesisError(
            f"{config.experiment_id}: phase {phase.descriptor} has min |det {block}| = "
            f"{report.min_abs_det:.3g} < d = {report.d:g}")
    return report


def _drift_summary(config, maxima_by_n):
    factor = config.tolerance("drift_factor", Config.DRIFT_FACTOR)
    value = drift([maxima_by_n[_grid_key(n)] for n in config.N_list])
    return {
        "max_ratio_by_N": maxima_by_n,
        "drift": value,
        "drift_factor": factor,
        "pass": bool(value < factor),
    }


def _compat_samples(config):
    radius = make_grid(max(config.N_list)).length / 2
    points = int(config.tolerances.get("lhs_points", Config.LHS_POINTS))
    return radius, points


def _exponent_regime(p):
    if p == 1.0 or math.isinf(p):
        return "endpoint"
    return "interior"


def exp_boundedness_M1_Minf(config: ExperimentConfig, workers=None) -> ExperimentReport:
    """||Op(a) f||_{M^inf(omega2)} / (||a||_case ||f||_{M^1(omega1)}) across grids."""
    report = _new_report(config)
    case = config.theorem_case
    block, norm_key = CASE_BLOCKS[case], CASE_NORMS[case]
    omega1, omega2, omega = config.weight("omega1"), config.weight("omega2"), config.weight("omega")
    amplitudes = random_amplitude_specs(config.corpus_size, config.corpus_seed)
    signals = random_signal_specs(config.corpus_size, config.corpus_seed + 1)
    amp_norms = _amplitude_norm_table(amplitudes, omega, workers)
    radius, points = _compat_samples(config)
    pass_flags = []
    for descriptor in config.phases:
        phase = parse_phase(descriptor)
        hessian = _require_hessian(config, phase, block)
        compat = check_phase_weight_compat(omega1, omega2, omega, phase,
                                           lhs_samples(5, points, radius, config.corpus_seed), workers=workers)
        if not compat.passed:
            raise HypothesisError(f"{config.experiment_id}: weights incompatible with {phase.descriptor}")
        maxima = {}
        for n in config.N_list:
            grid = make_grid(n)
            chi = gaussian_window(grid)
            inf_spec = MixedNormSpec(math.inf, math.inf, omega2)
            one_spec = MixedNormSpec(1, 1, omega1)

            def measure(pair):
                (amp_name, amp_spec), (sig_name, sig_spec) = pair
                f = sig_spec.sample(grid)
                image = apply_operator(fio_matrix(amp_spec.sample(grid), phase), f)
                numerator = mod_norm(image, chi, inf_spec)
                denominator = amp_norms[amp_name][norm_key] * mod_norm(f, chi, one_spec)
                return {"phase": phase.descriptor, "N": n, "amplitude": amp_name, "signal": sig_name,
                        "numerator": numerator, "denominator": denominator,
                        "ratio": safe_ratio(numerator, denominator)}

            rows = parallel_map(measure, list(zip(amplitudes, signals)), workers)
            report.cases.extend(rows)
            maxima[_grid_key(n)] = max(row["ratio"] for row in rows)
        summary = _drift_summary(config, maxima)
        summary.update({
            "hessian": hessian.to_dict(),
            "compatibility": compat.to_dict(),
            "hessian_deviation": hessian_deviation(phase, make_grid(max(config.N_list))),
            "amplitude_norm": norm_key,
        })
        report.summary.setdefault("phases", {})[phase.descriptor] = summary
        pass_flags.append(summary["pass"])
    report.summary["amplitude_norms"] = amp_norms
    report.passed = all(pass_flags)
    return report


def _amplitude_norm_table(amplitudes, omega, workers):
    coarse = make_grid(Config.SYMBOL_NORM_POINTS)

    def norms(item):
        name, spec = item
        return name, amplitude_norms(spec.sample(coarse), omega)

    return dict(parallel_map(norms, amplitudes, workers))


def _top_singular_check(T, grid, chi):
    """Ratio of M^2 norms at the top right singular vector against sigma_max."""
    _, sigma, vh = svd(T.scaled)
    f = Signal(np.conj(vh[0]) / math.sqrt(grid.spacing), grid)
    spec = MixedNormSpec(2, 2)
    ratio = mod_norm(apply_operator(T, f), chi, spec) / mod_norm(f, chi, spec)
    sigma_max = schatten_norms(T).norm(math.inf)
    return {"singular_ratio": ratio, "sigma_max": sigma_max, "abs_diff": abs(ratio - sigma_max),
            "agree": bool(abs(ratio - sigma_max) <= 1e-8 * max(1.0, sigma_max))}


def exp_boundedness_Mp(config: ExperimentConfig, workers=None) -> ExperimentReport:
    """||Op(a) f||_{M^p(omega2)} / (||a||_{M^{inf,1}} ||f||_{M^p(omega1)}) for each configured p."""
    report = _new_report(config)
    omega1, omega2, omega = config.weight("omega1"), config.weight("omega2"), config.weight("omega")
    amplitudes = random_amplitude_specs(config.corpus_size, config.corpus_seed)
    signals = random_signal_specs(config.corpus_size, config.corpus_seed + 1)
    amp_norms = _amplitude_norm_table(amplitudes, omega, workers)
    exponents = sorted({p for p, _ in config.exponent_pairs()})
    pass_flags = []
    for descriptor in config.phases:
        phase = parse_phase(descriptor)
        hessian = _require_hessian(config, phase, "full")
        phase_summary = {"hessian": hessian.to_dict(),
                         "hessian_deviation": hessian_deviation(phase, make_grid(max(config.N_list))),
                         "exponents": {}, "operator_norm_check": {}}
        maxima = {format_exponent(p): {} for p in exponents}
        for n in config.N_list:
            grid = make_grid(n)
            chi = gaussian_window(grid)
            specs = {p: (MixedNormSpec(p, p, omega2), MixedNormSpec(p, p, omega1)) for p in exponents}

            def measure(pair):
                (amp_name, amp_spec), (sig_name, sig_spec) = pair
                f = sig_spec.sample(grid)
                image = apply_operator(fio_matrix(amp_spec.sample(grid), phase), f)
                rows = []
                for p, (out_spec, in_spec) in specs.items():
                    numerator = mod_norm(image, chi, out_spec)
                    denominator = amp_norms[amp_name]["m_inf_1"] * mod_norm(f, chi, in_spec)
                    rows.append({"phase": phase.descriptor, "N": n, "p": format_exponent(p),
                                 "regime": _exponent_regime(p), "amplitude": amp_name, "signal": sig_name,
                                 "numerator": numerator, "denominator": denominator,
                                 "ratio": safe_ratio(numerator, denominator)})
                return rows

            rows = [row for group in parallel_map(measure, list(zip(amplitudes, signals)), workers)
                    for row in group]
            report.cases.extend(rows)
            for p in exponents:
                label = format_exponent(p)
                maxima[label][_grid_key(n)] = max(r["ratio"] for r in rows if r["p"] == label)
            first_operator = fio_matrix(amplitudes[0][1].sample(grid), phase)
            phase_summary["operator_norm_check"][_grid_key(n)] = _top_singular_check(first_operator, grid, chi)
        for label, by_n in maxima.items():
            entry = _drift_summary(config, by_n)
            entry["regime"] = _exponent_regime(parse_exponent(label))
            phase_summary["exponents"][label] = entry
            pass_flags.append(entry["pass"])
        report.summary.setdefault("phases", {})[phase.descriptor] = phase_summary
    report.summary["amplitude_norms"] = amp_norms
    report.passed = all(pass_flags)
    return report


def _symbol_norms(symbols, grid, specs, workers):
    """Modulation norms of every corpus symbol for every spec, one STFT pass per symbol."""
    window = gaussian_window_2d(grid)

    def norms(item):
        name, spec = item
        return name, mod_norms_2d(spec.sample(grid), window, specs)

    return dict(parallel_map(norms, symbols, workers))


def exp_schatten_membership(config: ExperimentConfig, workers=None) -> ExperimentReport:
    """||Op(b)||_{I_p} / ||b||_{M^{p,q}(omega)} for amplitudes b(x, zeta)."""
    report = _new_report(config)
    omega = config.weight("omega")
    symbols = random_symbol_specs(config.corpus_size, config.corpus_seed)
    pairs = config.exponent_pairs()
    specs = [MixedNormSpec(p, q, omega) for p, q in pairs]
    gated = [q <= min(p, conjugate_exponent(p)) for p, q in pairs]
    symbol_norms = {n: _symbol_norms(symbols, make_grid(n), specs, workers) for n in config.N_list}
    pass_flags = []
    for descriptor in config.phases:
        phase = parse_phase(descriptor)
        hessian = _require_hessian(config, phase, "y_zeta")
        maxima = {i: {} for i in range(len(pairs))}
        operator_checks = {}
        for n in config.N_list:
            grid = make_grid(n)

            def measure(item):
                name, spec = item
                operator = fio_matrix(amplitude_from_symbol(spec.sample(grid)), phase)
                schatten = schatten_norms(operator, exponents=[p for p, _ in pairs])
                rows = []
                for i, (p, q) in enumerate(pairs):
                    numerator = schatten.norm(p)
                    denominator = symbol_norms[n][name][i]
                    rows.append({"phase": phase.descriptor, "N": n, "p": format_exponent(p),
                                 "q": format_exponent(q), "control": not gated[i], "symbol": name,
                                 "numerator": numerator, "denominator": denominator,
                                 "ratio": safe_ratio(numerator, denominator)})
                check = None
                if any(math.isinf(p) for p, _ in pairs):
                    power = power_iteration_norm(operator)
                    check = abs(power - schatten.norm(math.inf))
                return rows, check

            results = parallel_map(measure, symbols, workers)
            rows = [row for group, _ in results for row in group]
            report.cases.extend(rows)
            checks = [c for _, c in results if c is not None]
            if checks:
                operator_checks[_grid_key(n)] = max(checks)
            for i, (p, q) in enumerate(pairs):
                selected = [r["ratio"] for r in rows if r["p"] == format_exponent(p) and r["q"] == format_exponent(q)]
                maxima[i][_grid_key(n)] = max(selected)
        exponent_summary = {}
        for i, (p, q) in enumerate(pairs):
            entry = _drift_summary(config, maxima[i])
            entry["control"] = not gated[i]
            exponent_summary[f"{format_exponent(p)},{format_exponent(q)}"] = entry
            if gated[i]:
                pass_flags.append(entry["pass"])
            else:
                logger.warning(f"{config.experiment_id}: control run q > min(p, p') for "
                               f"p={format_exponent(p)}, q={format_exponent(q)} is informational")
        report.summary.setdefault("phases", {})[phase.descriptor] = {
            "hessian": hessian.to_dict(),
            "exponents": exponent_summary,
            "operator_norm_power_iteration_diff": operator_checks,
        }
    report.passed = all(pass_flags)
    return report


def exp_kernel_continuity(config: ExperimentConfig, workers=None) -> ExperimentReport:
    """||K_{a,phi}||_{M^p(omega0)} / ||a||_{M^p(omega)} plus the operator table of the kernel theorem."""
    report = _new_report(config)
    omega, omega1, omega2 = config.weight("omega"), config.weight("omega1"), config.weight("omega2")
    v1, v2 = config.weight("v1"), config.weight("v2")
    symbols = random_symbol_specs(config.corpus_size, config.corpus_seed)
    signals = random_signal_specs(config.corpus_size, config.corpus_seed + 1)
    exponents = sorted({p for p, _ in config.exponent_pairs()})
    symbol_specs = [MixedNormSpec(p, p, omega) for p in exponents]
    symbol_norms = {n: _symbol_norms(symbols, make_grid(n), symbol_specs, workers) for n in config.N_list}
    radius, points = _compat_samples(config)
    seed = config.corpus_seed
    pass_flags = []
    for descriptor in config.phases:
        phase = parse_phase(descriptor)
        hessian = _require_hessian(config, phase, "y_zeta")
        omega0 = kernel_side_weight(omega, phase)
        cond1 = check_weightcond1(omega0, omega, phase, lhs_samples(4, points, radius, seed))
        cond2 = check_weightcond2(omega0, omega, v1, v2, lhs_samples(5, points, radius, seed + 1),
                                  lhs_samples(6, points, radius, seed + 2), workers=workers)
        failed = [r.label for r in [cond1, *cond2.values()] if not r.passed]
        if failed:
            raise HypothesisError(f"{config.experiment_id}: weight conditions fail for "
                                  f"{phase.descriptor}: {', '.join(failed)}")
        kernel_specs = [MixedNormSpec(p, p, omega0) for p in exponents]
        plain_specs = [MixedNormSpec(p, p, constant_weight(4)) for p in exponents]
        kernel_max = {format_exponent(p): {} for p in exponents}
        operator_max = {format_exponent(p): {} for p in exponents}
        for n in config.N_list:
            grid = make_grid(n)
            window = gaussian_window_2d(grid)
            chi = gaussian_window(grid)

            def measure(pair):
                (sym_name, sym_spec), (sig_name, sig_spec) = pair
                kernel = kernel_map(sym_spec.sample(grid), phase)
                weighted = mod_norms_2d(kernel.entries, window, kernel_specs + plain_specs)
                f = sig_spec.sample(grid)
                image = apply_operator(kernel, f)
                rows = []
                for i, p in enumerate(exponents):
                    kernel_norm, plain_norm = weighted[i], weighted[len(exponents) + i]
                    conj = conjugate_exponent(p)
                    out_norm = mod_norm(image, chi, MixedNormSpec(p, p, omega2))
                    in_norm = mod_norm(f, chi, MixedNormSpec(conj, conj, omega1))
                    rows.append({"phase": phase.descriptor, "N": n, "p": format_exponent(p),
                                 "symbol": sym_name, "signal": sig_name,
                                 "kernel_norm": kernel_norm, "symbol_norm": symbol_norms[n][sym_name][i],
                                 "ratio": safe_ratio(kernel_norm, symbol_norms[n][sym_name][i]),
                                 "operator_ratio": safe_ratio(out_norm, plain_norm * in_norm)})
                return rows

            rows = [row for group in parallel_map(measure, list(zip(symbols, signals)), workers) for row in group]
            report.cases.extend(rows)
            for p in exponents:
                label = format_exponent(p)
                kernel_max[label][_grid_key(n)] = max(r["ratio"] for r in rows if r["p"] == label)
                operator_max[label][_grid_key(n)] = max(r["operator_ratio"] for r in rows if r["p"] == label)
        exponent_summary = {}
        for p in exponents:
            label = format_exponent(p)
            entry = _drift_summary(config, kernel_max[label])
            entry["operator_table"] = _drift_summary(config, operator_max[label])
            exponent_summary[label] = entry
            pass_flags.append(entry["pass"])
        report.summary.setdefault("phases", {})[phase.descriptor] = {
            "hessian": hessian.to_dict(),
            "weightcond1": cond1.to_dict(),
            "weightcond2": {k: r.to_dict() for k, r in cond2.items()},
            "kernel_weight": omega0.descriptor,
            "exponents": exponent_summary,
        }
    report.summary["bridge_constant"] = math.sqrt(2 * math.pi)
    report.passed = all(pass_flags)
    return report


def exp_pseudomod(config: ExperimentConfig, workers=None) -> ExperimentReport:
    """Coefficient of variation of kernel/symbol modulation-norm ratios for t-quantization."""
    report = _new_report(config)
    threshold = config.tolerance("cv", Config.CV_THRESHOLD)
    exponents = sorted({p for p, _ in config.exponent_pairs()})
    weights = config.weight_list("omega")
    symbols = random_symbol_specs(config.corpus_size, config.corpus_seed)
    pass_flags = []
    for n in config.N_list:
        grid = make_grid(n)
        corpus = [(name, spec.sample(grid)) for name, spec in symbols]
        for p in exponents:
            for omega in weights:
                result = pseudomod_ratio_experiment(corpus, config.t, p, omega, kernel_window=config.kernel_window,
                                                    cv_threshold=threshold, workers=workers)
                row = result.to_dict()
                row.update({"N": n, "p": format_exponent(p), "symbols": [name for name, _ in symbols]})
                report.cases.append(row)
                pass_flags.append(result.passed)
    report.summary = {"max_cv": max(row["cv"] for row in report.cases), "cv_threshold": threshold}
    report.passed = all(pass_flags)
    return report


def _embedding_pairs(pairs):
    """Ordered (source, target) index pairs with p1 <= p2 and q1 <= q2."""
    return [(i, j) for i, (p1, q1) in enumerate(pairs) for j, (p2, q2) in enumerate(pairs)
            if i != j and p1 <= p2 and q1 <= q2 and (p1, q1) != (p2, q2)]


def exp_modspace(config: ExperimentConfig, workers=None) -> ExperimentReport:
    """Moyal, window independence, lattice equivalence and embeddings under grid refinement.

    The corpus is analytic, so every grid samples the same signals. Cases hold
    one row per signal and norm: (N, signal, p, q, weight, value).
    """
    report = _new_report(config)
    omega1, omega2 = config.weight("omega1"), config.weight("omega2")
    pairs = config.exponent_pairs()
    embeddings = _embedding_pairs(pairs)
    constant = weight_domination(omega2, omega1, make_grid(max(config.N_list)))
    if not constant <= Config.MODERATE_CAP:
        raise HypothesisError(f"{config.experiment_id}: omega2 <= C omega1 fails on the grid (C = {constant:.4g})")
    moyal_tol = config.tolerance("moyal", 1e-10)
    specs = [MixedNormSpec(p, q, omega1) for p, q in pairs]
    signal_specs = random_signal_specs(config.corpus_size, config.corpus_seed)
    corpora = {}
    per_grid = {}
    pass_flags = []
    for n in config.N_list:
        grid = make_grid(n)
        chi = gaussian_window(grid)
        corpus = []
        for name, spec in signal_specs:
            f = spec.sample(grid)
            corpus.append((name, f.with_values(f.values / l2_norm(f))))
        corpora[n] = corpus

        def measure(item):
            name, f = item
            return [{"N": n, "signal": name, **spec.to_dict(), "value": mod_norm(f, chi, spec)} for spec in specs]

        report.cases.extend(row for rows in parallel_map(measure, corpus, workers) for row in rows)
        unnormalized = gaussian_window(grid, width=0.7, normalize=False)
        moyal = max(abs(mod_norm(f, unnormalized, MixedNormSpec(2, 2)) / unnormalized.l2_norm - l2_norm(f))
                    / l2_norm(f) for _, f in corpus)
        windows = window_independence_report(corpus, chi, gaussian_window(grid, center=1.0), specs[0],
                                             workers=workers)
        lattice = lattice_equivalence_report(corpus, default_cover(grid), chi, MixedNormSpec(2, 2, omega1),
                                             workers=workers)
        per_grid[_grid_key(n)] = {
            "moyal_max_rel_error": moyal,
            "window_independence": windows.to_dict(),
            "lattice_equivalence": lattice.to_dict(),
        }
        pass_flags.extend([moyal < moyal_tol, windows.passed, lattice.passed])
    embedding_summary = {}
    for i, j in embeddings:
        source, target = MixedNormSpec(*pairs[i], omega1), MixedNormSpec(*pairs[j], omega2)
        refinement = embedding_refinement_report(corpora, source, target,
                                                 factor=config.tolerance("drift_factor", Config.DRIFT_FACTOR),
                                                 workers=workers)
        label = (f"{format_exponent(pairs[i][0])},{format_exponent(pairs[i][1])}->"
                 f"{format_exponent(pairs[j][0])},{format_exponent(pairs[j][1])}")
        embedding_summary[label] = refinement.to_dict()
        pass_flags.append(refinement.passed)
    report.summary = {"grids": per_grid, "embeddings": embedding_summary, "weight_constant": constant,
                      "moyal_tolerance": moyal_tol}
    report.passed = all(pass_flags)
    return report


EXPERIMENTS = {
    "M1_Minf": exp_boundedness_M1_Minf,
    "Mp": exp_boundedness_Mp,
    "schatten_membership": exp_schatten_membership,
    "kernel_continuity": exp_kernel_continuity,
    "pseudomod": exp_pseudomod,
    "modspace": exp_modspace,
}


def _new_report(config):
    return ExperimentReport(config.experiment_id, config.kind, config_hash(config.to_dict()), config.corpus_seed)


def run_experiment(config: ExperimentConfig, workers=None) -> ExperimentReport:
    """Run one experiment; failed hypotheses yield an aborted report."""
    logger.info(f"Starting experiment {config.experiment_id} ({config.kind})")
    try:
        report = EXPERIMENTS[config.kind](config, workers)
    except HypothesisError as e:
        logger.error(f"Experiment {config.experiment_id} aborted: {e.message}")
        report = _new_report(config)
        report.status = "aborted"
        report.diagnostic = e.message
        return report
    except Exception as e:
        logger.error(f"Experiment {config.experiment_id} failed: {str(e)}")
        report = _new_report(config)
        report.status = "error"
        report.diagnostic = str(e)
        return report
    logger.info(f"Finished experiment {config.experiment_id}: pass={report.passed}")
    return report


def parse_config(data):
    """Experiment configs from a parsed JSON document."""
    if not isinstance(data, dict):
        raise ConfigurationError("Configuration must be a JSON object")
    experiments = data.get("experiments", [])
    if not isinstance(experiments, list):
        raise ConfigurationError("'experiments' must be a list")
    configs = [ExperimentConfig.from_dict(item) for item in experiments]
    ids = [c.experiment_id for c in configs]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("Duplicate experiment_id in configuration")
    return configs


def load_config(path):
    """Return (configs, raw document) from a JSON config file."""
    try:
        with open(path) as handle:
            data = json.load(handle)
    except OSError as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Malformed JSON in {path}: {e}")
    return parse_config(data), data


def run_experiments(configs, workers=None):
    """Run experiments in a worker pool; reports come back in configuration order."""
    reports = [None] * len(configs)
    timings = {}
    if not configs:
        return reports, timings
    n_workers = min(worker_count(workers), len(configs))
    with ThreadPoolExecutor(max_workers=n_workers) as executor:
        started = {}
        future_to_index = {}
        for i, config in enumerate(configs):
            started[i] = time.perf_counter()
            future_to_index[executor.submit(run_experiment, config, workers)] = i
        for future in as_completed(future_to_index):
            i = future_to_index[future]
            reports[i] = future.result()
            timings[configs[i].experiment_id] = time.perf_counter() - started[i]
    return reports, timings


def build_bundle(reports, document_hash):
    return {
        "config_hash": document_hash,
        "experiments": [report.to_dict() for report in reports],
        "pass": all(report.passed for report in reports),
    }


def _scalar(value):
    value = to_jsonable(value)
    if isinstance(value, (list, dict)):
        return json.dumps(value, sort_keys=True)
    return value


def write_bundle(bundle, report_dir, metadata=None, dat=True):
    """Write per-experiment JSON/CSV (and .dat), bundle.json and run_metadata.json."""
    try:
        _write_files(bundle, report_dir, metadata, dat)
    except OSError as e:
        raise ExperimentError(f"Cannot write reports to {report_dir}: {e}")
    logger.info(f"Wrote report bundle to {report_dir}")


def _write_files(bundle, report_dir, metadata, dat):
    os.makedirs(report_dir, exist_ok=True)
    for experiment in bundle["experiments"]:
        stem = os.path.join(report_dir, experiment["experiment_id"])
        with open(f"{stem}.json", "w") as handle:
            json.dump(to_jsonable(experiment), handle, sort_keys=True, indent=2)
        cases = experiment["cases"]
        columns = sorted({key for case in cases for key in case})
        with open(f"{stem}.csv", "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(columns)
            for case in cases:
                writer.writerow([_scalar(case.get(column, "")) for column in columns])
        ratio_cases = [case for case in cases if "ratio" in case and "N" in case]
        if dat and ratio_cases:
            with open(f"{stem}.dat", "w") as handle:
                handle.write("# N max_ratio\n")
                for n in sorted({case["N"] for case in ratio_cases}):
                    ratios = [case["ratio"] for case in ratio_cases if case["N"] == n]
                    handle.write(f"{n} {max(ratios):.12g}\n")
    with open(os.path.join(report_dir, "bundle.json"), "w") as handle:
        json.dump(to_jsonable(bundle), handle, sort_keys=True, indent=2)
    if metadata is not None:
        with open(os.path.join(report_dir, "run_metadata.json"), "w") as handle:
            json.dump(to_jsonable(metadata), handle, sort_keys=True, indent=2)


def run_all(config_path, report_dir=None, workers=None, dat=True):
    """Run every configured experiment; returns (exit code, bundle).

    Exit codes: 0 when every experiment passes, 1 on a failed or aborted
    experiment, 2 for an unreadable or invalid configuration.
    """
    started_at = datetime.now(timezone.utc).isoformat()
    try:
        configs, document = load_config(config_path)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e.message}")
        return e.exit_code, {"error": e.message}
    reports, timings = run_experiments(configs, workers)
    bundle = build_bundle(reports, config_hash(document))
    if report_dir:
        metadata = {
            "started_at": started_at,
            "finished_at": datetime.now(timezone.utc).isoformat(),
            "durations_s": timings,
            "version": Config.APP_VERSION,
            "config_path": str(config_path),
        }
        try:
            write_bundle(bundle, report_dir, metadata, dat=dat)
        except ExperimentError as e:
            logger.error(e.message)
            return e.exit_code, {**bundle, "error": e.message}
    return (0 if bundle["pass"] else 1), bundle
