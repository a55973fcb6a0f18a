"""Experiment configuration, the five canonical experiments, and report emission.

Every trial is a pure function of (config, seed).  Trials may run in worker
processes; results are always merged back in seed order, so serial and
parallel runs write identical bytes.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, field, fields
import json
import math
import os

import numpy as np

from tinygroups import epochs, gossip, groupgraph, inputgraph
from tinygroups import pow as pw
from tinygroups.adversary import AdversaryStrategy
from tinygroups.analysis import chernoff_group_failure, percentiles, pf_target, size_groups_for_target
from tinygroups.idring import adjacent_distances
from tinygroups.seeding import stream

EXPERIMENTS = ("e1", "e2", "e3", "e4", "e5")


class ConfigError(ValueError):
    """Bad configuration; raised before any trial runs."""


def parse_seeds(seeds):
    """``"a..b"`` (inclusive), ``"a,b,c"``, an int, or a list of ints."""
    if isinstance(seeds, int):
        return [seeds]
    if isinstance(seeds, (list, tuple)):
        return [int(s) for s in seeds]
    text = str(seeds).strip()
    try:
        if ".." in text:
            a, b = (int(x) for x in text.split("..", 1))
        else:
            return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"bad seed list {text!r}") from e
    if b < a:
        raise ConfigError(f"empty seed range {text!r}")
    return list(range(a, b + 1))


@dataclass(frozen=True)
class SimConfig:
    n: int = 1024
    beta: float = 0.05
    delta: float = 2.5
    d1: float = 8.0
    d2: float = 24.0
    k: float = 2.0
    T: int = 4096
    epochs: int = 3
    c0: float = 4.0
    d0: float = 4.0
    b: float = 1.0
    ell: float = 8.0
    tau_policy: str = "calibrated"  # or "fixed"
    tau: float = 0.0
    rate: int = 1
    adversary: str = "worst"
    seeds: object = "0..9"
    experiment: str = "e1"
    out: str = ""
    # static searches
    p_f: tuple = (0.005, 0.01, 0.02)
    search_trials: int = 100_000
    congestion_trials: int = 100_000
    # epochs
    failure_model: str = "link"
    churn_rate: float = 0.05
    # proof of work (its own, larger population)
    pow_n: int = 20_000
    pow_T: int = 20
    pow_window: float = 1.1
    pow_epsilon: float = 0.1
    pow_hoard_epochs: int = 2
    # gossip
    gossip_p_f: float = -1.0  # negative: 1 / ln^k n
    gossip_variants: tuple = ("sees_phase1", "blind")

    def __post_init__(self):
        if not 0.0 <= self.beta < 0.5:
            raise ConfigError("beta must lie in [0, 1/2)")
        if not self.d1 < self.d2:
            raise ConfigError("need d1 < d2")
        if not (1 + self.delta) * self.beta < 0.5:
            raise ConfigError("(1 + delta) * beta must be < 1/2 for good majorities")
        if self.n < 16 or self.d1 * math.log(math.log(self.n)) < 3:
            raise ConfigError("n too small: d1 ln ln n must be >= 3")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.tau_policy not in ("calibrated", "fixed"):
            raise ConfigError("tau_policy must be 'calibrated' or 'fixed'")
        if self.tau_policy == "fixed" and not 0 < self.tau < 1:
            raise ConfigError("a fixed tau must lie in (0, 1)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        for v in self.gossip_variants:
            if v not in ("sees_phase1", "blind"):
                raise ConfigError(f"unknown gossip variant {v!r}")
        try:
            AdversaryStrategy.from_name(self.adversary)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        parse_seeds(self.seeds)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        d = dict(d)
        for key in ("p_f", "gossip_variants"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(d, dict):
            raise ConfigError("config must be a flat JSON object")
        return cls.from_dict(d)

    def with_(self, **kw):
        d = asdict(self)
        d.update(kw)
        return SimConfig.from_dict(d)

    @property
    def seed_list(self):
        return parse_seeds(self.seeds)

    def strategy(self):
        return AdversaryStrategy.from_name(self.adversary)

    def epoch_params(self, dual=True, n=None):
        return epochs.EpochParams(n=n or self.n, beta=self.beta, delta=self.delta, d1=self.d1,
                                  d2=self.d2, T=self.T, dual=dual, failure_model=self.failure_model,
                                  churn_rate=self.churn_rate)

    def rule(self, n=None):
        return groupgraph.SizeRule(n or self.n, self.beta, self.delta, self.d1, self.d2)

    def puzzle(self):
        if self.tau_policy == "fixed":
            return pw.PuzzleParams(self.tau, self.pow_T, self.rate, self.ell, self.pow_epsilon, self.pow_n)
        return pw.PuzzleParams.calibrated(self.pow_T, self.rate, self.ell, self.pow_epsilon, self.pow_n)

    def gossip_params(self):
        return gossip.GossipParams(self.n, self.T, self.b, self.c0, self.d0, self.ell)

    def effective_gossip_pf(self):
        return self.gossip_p_f if self.gossip_p_f >= 0 else 1.0 / math.log(self.n) ** self.k


@dataclass
class TrialResult:
    experiment: str
    seed: int
    rows: list = field(default_factory=list)

    def lines(self):
        for i, row in enumerate(self.rows):
            yield json.dumps({"experiment": self.experiment, "seed": self.seed, "row": i, **row},
                             sort_keys=True)


# -- E1: static robustness ---------------------------------------------------

def bad_key_share(ring, bad):
    """Fraction of the ring owned (as successor) by bad IDs."""
    owned = np.roll(adjacent_distances(ring), 1)
    return float(owned[bad].sum())


def group_goodness(cfg, seed, n=None):
    """Bad-group fraction of organically built groups, with its exact oracle."""
    p = cfg.epoch_params(n=n)
    ring, bad = epochs.draw_ring(p, seed, 1, AdversaryStrategy.passive())
    base = inputgraph.build(ring)
    rule = p.rule()
    q = groupgraph.organic(base, ring, bad, rule)
    share = bad_key_share(ring, bad)
    oracle = chernoff_group_failure(rule.slots, share, rule.bad_fraction).exact
    return q, bad, {"bad_group_fraction": float(1.0 - q.good.mean()),
                    "bad_group_oracle": oracle, "bad_key_share": share}


def trial_e1(cfg, seed):
    q, _, good_row = group_goodness(cfg, seed)
    n = len(q)
    cong = inputgraph.congestion_array(q.base, cfg.congestion_trials, stream(seed, "e1-congestion"))
    nc = float(cong.max() * n)
    exponent = math.log(nc) / math.log(math.log(n)) if nc > 1 else 0.0
    rows = []
    for i, p_f in enumerate(cfg.p_f):
        groupgraph.mark_colors(q, stream(seed, "e1-colour", i), p_f)
        s = groupgraph.sample_searches(q, cfg.search_trials, stream(seed, "e1-search", i))
        sum_red = float(s.rho_hat[q.red].sum())
        rows.append({
            "p_f": p_f,
            "x_hat": s.x_hat,
            "sum_red_rho": sum_red,
            "max_rho": float(s.rho_hat.max()),
            "x_over_pf": s.x_hat / p_f if p_f > 0 else 0.0,
            "n_congestion": nc,
            "congestion_exponent": exponent,
            "red_groups": int(q.red.sum()),
            "mean_search_cost": float(s.costs.mean()),
            **good_row,
        })
    return rows


# -- E2 / E5: epochs, dual and single -----------------------------------------

def trial_epochs(cfg, seed, dual):
    rows = epochs.run(cfg.epoch_params(dual=dual), seed, cfg.epochs, cfg.strategy())
    for r in rows:
        r["dual"] = dual
    return rows


# -- E3: proof of work ---------------------------------------------------------

def trial_e3(cfg, seed):
    params = cfg.puzzle()
    budget = pw.ComputeBudget.for_network(cfg.pow_n, cfg.beta)
    window = int(math.floor(cfg.pow_window * params.T / 2))
    r = stream(seed, "e3-string").bytes(params.nbytes)
    honest = pw.adversary_generate(budget, window, stream(seed, "e3-honest"), params, r)
    biased = pw.adversary_generate(budget, window, stream(seed, "e3-bias"), params, r,
                                   "bias_small_outputs", single_hash=True)
    biased_double = pw.adversary_generate(budget, window, stream(seed, "e3-bias2"), params, r,
                                          "bias_small_outputs")
    row = {
        "tau": params.tau,
        "window_steps": window,
        "adversary_units": budget.adversary_units,
        "certificates": len(honest),
        "count_bound": pw.count_bound(budget.adversary_units, params.epsilon),
        "chi2_p": pw.chi_square_uniform([float(c.id_value) for c in honest]),
        "biased_single_certificates": len(biased),
        "biased_single_chi2_p": pw.chi_square_uniform([float(c.id_value) for c in biased]),
        "biased_double_chi2_p": pw.chi_square_uniform([float(c.id_value) for c in biased_double]),
    }
    if cfg.pow_hoard_epochs > 0:
        for rotate in (True, False):
            valid, total = pw.precompute_attack(budget, params, stream(seed, "e3-hoard", rotate),
                                                cfg.pow_hoard_epochs, rotate)
            key = "rotating" if rotate else "fixed"
            row[f"hoard_{key}_valid"] = valid
            row[f"hoard_{key}_total"] = total
    return [row]


# -- E4: gossip ------------------------------------------------------------------

def trial_e4(cfg, seed):
    p = cfg.epoch_params()
    ring, bad = epochs.draw_ring(p, seed, 1, cfg.strategy())
    base = inputgraph.build(ring)
    q = groupgraph.organic(base, ring, bad, p.rule())
    p_f = cfg.effective_gossip_pf()
    groupgraph.mark_colors(q, stream(seed, "e4-colour"), p_f)
    gp = cfg.gossip_params()
    delay = cfg.strategy().gossip_behavior == "delay_release"
    rows = []
    for v, variant in enumerate(cfg.gossip_variants):
        res = gossip.run_gossip(q, bad, gp, stream(seed, "e4-gossip", v), stream(seed, "e4-adversary", v),
                                delay_release=delay, adversary_sees_phase1=(variant == "sees_phase1"))
        comp = res.good_component
        sizes = [len(res.solutions[int(w)].strings) for w in comp]
        global_min = res.global_min
        if res.adversary_string is not None and res.adversary_string.t < global_min.t:
            global_min = res.adversary_string
        reached = all(any(m.s == global_min.s for m in res.solutions[int(w)].strings) for w in comp)
        n_, T_ = gp.n, gp.T
        bound_unit = n_ * math.log(T_) * math.log(n_) ** 3
        structural = n_ * gp.forward_ceiling() * int(base.degree.max()) * int(q.sizes.max()) ** 2
        rows.append({
            "variant": variant,
            "p_f": p_f,
            "agreement": bool(res.agreement()),
            "global_min_everywhere": bool(reached),
            "adversary_beat_honest": bool(res.adversary_string is not None
                                          and res.adversary_string.t < res.global_min.t),
            "distinct_choices": len({res.chosen[int(w)].s for w in comp}),
            "max_solution_size": int(max(sizes)),
            "solution_cap": gp.solution_size,
            "giant_fraction": float(len(res.component) / n_),
            "good_component": int(comp.size),
            "max_forwards": int(res.forwards.max()),
            "forward_ceiling": gp.forward_ceiling(),
            "messages": int(res.messages),
            "weighted_messages": int(res.weighted_messages),
            "kappa": float(res.kappa()),
            "kappa_structural": structural / bound_unit,
            "phase1_end": res.clock.phase1_end,
            "phase2_end": res.clock.phase2_end,
            "adversary_tries": int(res.adversary_tries),
        })
    return rows


def run_trial(cfg, seed):
    if cfg.experiment == "e1":
        rows = trial_e1(cfg, seed)
    elif cfg.experiment == "e2":
        rows = trial_epochs(cfg, seed, dual=True)
    elif cfg.experiment == "e3":
        rows = trial_e3(cfg, seed)
    elif cfg.experiment == "e4":
        rows = trial_e4(cfg, seed)
    else:
        rows = trial_epochs(cfg, seed, dual=False)
    return TrialResult(cfg.experiment, seed, [_plain(r) for r in rows])


def _plain(row):
    out = {}
    for k, v in row.items():
        if isinstance(v, np.generic):
            v = v.item()
        out[k] = v
    return out


def _run_one(args):
    cfg, seed = args
    return run_trial(cfg, seed)


def run_experiment(cfg, seeds=None, workers=1):
    """All trials of ``cfg`` in seed order; ``workers > 1`` uses processes."""
    if not isinstance(cfg, SimConfig):
        raise ConfigError("run_experiment needs a SimConfig")
    seeds = cfg.seed_list if seeds is None else list(seeds)
    if not seeds:
        raise ConfigError("no seeds")
    if workers <= 1:
        return [run_trial(cfg, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, [(cfg, s) for s in seeds]))


# -- reports ----------------------------------------------------------------------

def jsonl_text(results):
    return "".join(line + "\n" for r in results for line in r.lines())


def summarize(results):
    """Per-metric mean and 5/50/95 percentiles over every numeric column."""
    cols = {}
    for r in results:
        for row in r.rows:
            for k, v in row.items():
                if isinstance(v, (bool, int, float)):
                    cols.setdefault(k, []).append(float(v))
    return {k: percentiles(v) for k, v in sorted(cols.items())}


def emit_report(results, path):
    """Write trials.jsonl, trials.csv, summary.csv and digest.txt under ``path``."""
    if not results or not any(r.rows for r in results):
        raise ValueError("no results to report")
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"cannot write to {path}")
    with open(os.path.join(path, "trials.jsonl"), "w") as fh:
        fh.write(jsonl_text(results))
    keys = []
    for r in results:
        for row in r.rows:
            for k in row:
                if k not in keys:
                    keys.append(k)
    with open(os.path.join(path, "trials.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["experiment", "seed", *keys])
        for r in results:
            for row in r.rows:
                w.writerow([r.experiment, r.seed, *[row.get(k, "") for k in keys]])
    summary = summarize(results)
    with open(os.path.join(path, "summary.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "mean", "p5", "p50", "p95"])
        for k, s in summary.items():
            w.writerow([k, repr(s["mean"]), repr(s["p5"]), repr(s["p50"]), repr(s["p95"])])
    lines = [f"experiment {results[0].experiment}: {len(results)} trials, "
             f"{sum(len(r.rows) for r in results)} rows"]
    for k, s in summary.items():
        lines.append(f"  {k:<34} mean {s['mean']:<12.6g} p5 {s['p5']:<12.6g} "
                     f"p50 {s['p50']:<12.6g} p95 {s['p95']:.6g}")
    with open(os.path.join(path, "digest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def rows_by_epoch(results, key):
    """``(seeds, epochs)`` array of ``key`` from epoch-experiment results."""
    return np.array([[row[key] for row in r.rows] for r in results], dtype=float)


def params_summary(beta, n, k, delta=2.5, T=4096):
    """Sized d1, calibrated tau and gossip phase boundaries for a network size."""
    sizing = size_groups_for_target(beta, delta, pf_target(n, k), n)
    tau = pw.calibrate_tau(T, 1)
    d = max(1, 2 * math.ceil(2 * math.log2(n)))
    clock = gossip.PhaseClock.for_epoch(T, d)
    return {"n": n, "beta": beta, "k": k, "delta": delta, "target_pf": pf_target(n, k),
            "d1": sizing.d1, "group_size": sizing.m, "tail": sizing.tail, "T": T, "tau": tau,
            "phase1_end": clock.phase1_end, "phase2_end": clock.phase2_end,
            "phase3_end": clock.phase3_end}

