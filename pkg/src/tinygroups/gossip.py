"""Agreement on global random strings by gated flooding.

Outputs ``t = h(s xor r_prev)`` fall into dyadic bins ``B_j = [2^-j, 2^-(j-1))``.
An ID forwards a string only if it beats every value it has seen in that
bin and the bin's counter is below its cap, so each ID forwards a bounded
number of strings per bin.  The first half-epoch runs in three phases:
local generation, flooding of each ID's minimum, and a final propagation
phase without generation.  Afterwards each ID keeps the smallest strings it
saw as its solution set.
"""

from dataclasses import dataclass, field
import hashlib
import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from tinygroups.hashing import oracle
from tinygroups.idring import SCALE, IdPoint


class NoStrings(ValueError):
    """An ID saw no strings at all, which signals isolation."""


@dataclass(frozen=True)
class GossipParams:
    n: int
    T: int
    b: float = 1.0
    c0: float = 4.0
    d0: float = 4.0
    ell: float = 8.0

    @property
    def bins(self):
        return max(1, math.ceil(self.b * math.log(self.n * self.T)))

    @property
    def cap(self):
        return math.ceil(self.c0 * math.log(self.n))

    @property
    def solution_size(self):
        return int(math.floor(self.d0 * math.log(self.n)))

    @property
    def nbytes(self):
        return max(1, math.ceil(self.ell * math.log(self.n) / 8))

    def forward_ceiling(self):
        """Most strings one ID can ever forward in an epoch."""
        return self.cap * self.bins


@dataclass(frozen=True)
class StringMsg:
    s: bytes
    t: int  # raw 64-bit output
    origin: IdPoint

    @property
    def t_fraction(self):
        return self.t / SCALE


_TAG = b"gossip-h"


def output(s, r_prev):
    return oracle(_TAG, bytes(a ^ b for a, b in zip(s, r_prev)))


def _xor(a, b):
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(len(a), "big")


def best_of(rng, r_prev, count, beat=None):
    """Smallest-output string among ``count`` fresh random strings.

    The puzzle input ``x = s xor r_prev`` is uniform whenever ``s`` is, so
    inputs are drawn directly and ``s`` is recovered only for the winner.
    Stops early once an output below ``beat`` turns up.  Returns
    ``(s, t, tries)``.
    """
    nb = len(r_prev)
    prefix = _TAG + b"\x00"
    sha = hashlib.sha256
    best_d, best_x, tries = b"\xff" * 9, None, 0
    beat_d = None if beat is None else int(beat).to_bytes(8, "big")
    while tries < count:
        k = min(65536, count - tries)
        blob = rng.bytes(nb * k)
        for i in range(0, nb * k, nb):
            x = blob[i:i + nb]
            d = sha(prefix + x).digest()[:8]
            if d < best_d:
                best_d, best_x = d, x
                if beat_d is not None and d < beat_d:
                    return _xor(best_x, r_prev), int.from_bytes(best_d, "big"), tries + i // nb + 1
        tries += k
    return _xor(best_x, r_prev), int.from_bytes(best_d, "big"), tries


def make_msg(s, r_prev, origin):
    return StringMsg(s, output(s, r_prev), origin)


def bin_index(t, bins):
    """Bin of output ``t`` (a float in [0, 1) or a raw 64-bit int), capped at ``bins``.

    ``t = 0`` goes to the deepest bin.
    """
    if isinstance(t, float):
        if not 0.0 <= t < 1.0:
            raise ValueError("output must lie in [0, 1)")
        if t == 0.0:
            return bins
        _, e = math.frexp(t)
        j = 1 - e
    else:
        t = int(t)
        if t == 0:
            return bins
        j = 65 - t.bit_length()
    return min(j, bins)


@dataclass
class BinTable:
    """Per-ID gate: running minimum and record counter for each bin."""

    bins: int
    cap: int
    mins: list = None
    counters: list = None
    seen: dict = field(default_factory=dict)  # string key -> StringMsg

    def __post_init__(self):
        if self.mins is None:
            self.mins = [SCALE] * (self.bins + 1)
            self.counters = [0] * (self.bins + 1)


def offer_string(table, msg, r_prev=None):
    """Record ``msg`` and return True iff it should be forwarded.

    With ``r_prev`` the output is recomputed first; a mismatch is dropped.
    """
    if r_prev is not None and output(msg.s, r_prev) != msg.t:
        return False
    table.seen.setdefault(msg.s, msg)
    j = bin_index(msg.t, table.bins)
    if msg.t < table.mins[j] and table.counters[j] < table.cap:
        table.mins[j] = msg.t
        table.counters[j] += 1
        return True
    return False


@dataclass(frozen=True)
class SolutionSet:
    strings: tuple  # StringMsg sorted by t
    chosen_min: StringMsg


def assemble_solution_set(table, size, chosen_min=None):
    """Smallest outputs first, deepest bin upward, until ``size`` strings are held."""
    if not table.seen:
        raise NoStrings("no strings observed")
    by_bin = {}
    for msg in table.seen.values():
        by_bin.setdefault(bin_index(msg.t, table.bins), []).append(msg)
    out = []
    for j in sorted(by_bin, reverse=True):
        out.extend(sorted(by_bin[j], key=lambda m: m.t))
        if len(out) >= size:
            break
    out = tuple(out[:size])
    return SolutionSet(out, chosen_min if chosen_min is not None else out[0])


@dataclass(frozen=True)
class PhaseClock:
    phase1_end: int
    phase2_end: int
    phase3_end: int

    @classmethod
    def for_epoch(cls, T, dprime_ln_n):
        p3 = T // 2
        p2 = p3 - dprime_ln_n
        p1 = p2 - dprime_ln_n
        if p1 < 1:
            raise ValueError("half-epoch too short for the propagation phases")
        return cls(p1, p2, p3)

    def phase(self, step):
        if step <= self.phase1_end:
            return 1
        if step <= self.phase2_end:
            return 2
        if step <= self.phase3_end:
            return 3
        raise ValueError("step outside the first half-epoch")


def link_matrix(base, keep):
    """Directed link graph restricted to groups in ``keep``."""
    rows, cols = np.nonzero(np.arange(base.width)[None, :] < base.degree[:, None])
    dst = base.neighbors[rows, cols]
    sel = keep[rows] & keep[dst]
    n = len(base)
    return csr_matrix((np.ones(int(sel.sum())), (rows[sel], dst[sel])), shape=(n, n))


def giant_component(q):
    """Largest strongly connected set of blue groups under their links."""
    blue = q.blue
    if not blue.any():
        return np.zeros(0, dtype=np.int64)
    _, labels = connected_components(link_matrix(q.base, blue), directed=True, connection="strong")
    labels = np.where(blue, labels, -1)
    counts = np.bincount(labels[blue])
    return np.flatnonzero(labels == int(np.argmax(counts)))


def diameter(q, members):
    """Longest shortest link path (in steps) inside ``members``."""
    if members.size <= 1:
        return 0
    keep = np.zeros(len(q), dtype=bool)
    keep[members] = True
    d = shortest_path(link_matrix(q.base, keep), method="D", unweighted=True, indices=members)
    return int(d[:, members].max())


@dataclass
class GossipResult:
    params: GossipParams
    clock: PhaseClock
    component: np.ndarray
    good_component: np.ndarray
    chosen: dict  # node -> StringMsg fixed at the end of phase 2
    solutions: dict  # node -> SolutionSet
    global_min: StringMsg
    adversary_string: object
    forwards: np.ndarray
    adversary_tries: int
    messages: int
    weighted_messages: int
    trace: list

    def agreement(self):
        """Every good component ID's choice lies in every other's solution set."""
        choices = {self.chosen[w].s for w in self.good_component}
        return all(choices <= {m.s for m in self.solutions[u].strings} for u in self.good_component)

    def all_chose_global_min(self):
        return all(self.chosen[w].s == self.global_min.s for w in self.good_component)

    def kappa(self):
        n, T = self.params.n, self.params.T
        return self.weighted_messages / (n * math.log(T) * math.log(n) ** 3)


def run_gossip(q, leader_bad, params, rng, adversary_rng=None, delay_release=False,
               adversary_sees_phase1=True, release_fraction=0.5, trace=False, dprime_ln_n=None, mining_factor=200):
    """Simulate the three phases on group graph ``q``; red groups drop everything."""
    n = len(q)
    base = q.base
    comp = giant_component(q)
    if dprime_ln_n is None:
        dprime_ln_n = max(1, 2 * diameter(q, comp))
    clock = PhaseClock.for_epoch(params.T, dprime_ln_n)
    participant = q.blue
    generators = np.flatnonzero(participant & ~np.asarray(leader_bad, dtype=bool))
    tables = [BinTable(params.bins, params.cap) for _ in range(n)]
    r_prev = rng.bytes(params.nbytes)
    nb = params.nbytes
    ids = base.ids
    sizes = q.sizes
    log = []

    # phases 1 and 2 generate; each generator keeps its running minimum
    local = {}
    gen_steps = clock.phase2_end
    for w in generators:
        # the minimum over phase 1, then any later improvement during phase 2
        s, t, _ = best_of(rng, r_prev, clock.phase1_end)
        found = clock.phase1_end
        s2, t2, tries = best_of(rng, r_prev, gen_steps - clock.phase1_end, beat=t)
        if t2 < t:
            s, t, found = s2, t2, clock.phase1_end + tries
        local[int(w)] = (StringMsg(s, t, ids.point(int(w))), found)
    all_min = min((m for m, _ in local.values()), key=lambda m: m.t, default=None)

    adv_msg = None
    adv_tries = 0
    release_to = np.zeros(0, dtype=np.int64)
    if delay_release:
        if adversary_rng is None:
            raise ValueError("a delayed release needs an adversary rng")
        units = int(np.sum(leader_bad))
        beat = all_min.t if (adversary_sees_phase1 and all_min is not None) else None
        budget = max(1, units * gen_steps)
        if beat is not None:
            # stress arm: mining continues until the honest minimum is beaten
            budget *= mining_factor
        s, t, adv_tries = best_of(adversary_rng, r_prev, budget, beat)
        adv_msg = StringMsg(s, t, IdPoint(0))
        good_comp = comp[~np.asarray(leader_bad, bool)[comp]]
        k = max(1, int(release_fraction * good_comp.size))
        release_to = np.sort(adversary_rng.choice(good_comp, size=min(k, good_comp.size), replace=False))

    forwards = np.zeros(n, dtype=np.int64)
    messages = 0
    weighted = 0
    outbox = []
    chosen = {}
    for step in range(clock.phase1_end + 1, clock.phase3_end + 1):
        inbox = []
        # deliver last step's forwards along links, in leader order
        for sender, msg in sorted(outbox, key=lambda x: (x[0], x[1].t)):
            for r in base.neighbor_indices(sender):
                messages += 1
                weighted += int(sizes[sender]) * int(sizes[r])
                if participant[r]:
                    inbox.append((int(r), msg))
        if clock.phase(step) == 2:
            for w, (msg, found) in local.items():
                # an ID offers its own minimum once it has found it
                if found <= step and (step == clock.phase1_end + 1 or found == step):
                    inbox.append((w, msg))
        if adv_msg is not None and step == clock.phase2_end:
            inbox.extend((int(w), adv_msg) for w in release_to)
        outbox = []
        for r, msg in inbox:
            fwd = offer_string(tables[r], msg)
            if trace:
                log.append({"step": step, "origin": msg.origin.hex(), "t": msg.t_fraction,
                            "action": "forward" if fwd else "drop"})
            if fwd:
                forwards[r] += 1
                outbox.append((r, msg))
        if step == clock.phase2_end:
            for w in comp:
                if tables[w].seen:
                    chosen[int(w)] = min(tables[w].seen.values(), key=lambda m: m.t)

    good_comp = comp[~np.asarray(leader_bad, bool)[comp]]
    solutions = {int(w): assemble_solution_set(tables[w], params.solution_size, chosen.get(int(w)))
                 for w in comp if tables[w].seen}
    q.ledger.add("gossip", weighted)
    return GossipResult(params, clock, comp, good_comp, chosen, solutions, all_min, adv_msg,
                        forwards, adv_tries, messages, weighted, log)


def count_gossip_messages(result):
    """Total gossip messages with the all-to-all member factor."""
    return result.weighted_messages
