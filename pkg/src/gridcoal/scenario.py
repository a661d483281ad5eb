"""Scenario definition, the built-in six-DC preset, file ingestion, traces.

A scenario bundles the provider fleet, per-bus price parameters, grid
supply, migration costs, chain dynamics, and the per-slot workload matrix.
Scenario files are INI-style with sections [meta], [providers], [pricing],
[grid], [dynamics], [trace], [migration]; prices accept a ``c`` suffix for
cents/kWh (converted to $/kWh on ingest).
"""

import configparser
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .allocation import MigrationCostMatrix
from .dynamics import DynamicsParams
from .model import DataCenterSpec, GridSpec, power_draw
from .policy import ActionGrid, SlotModel, build_action_grid

DEFAULT_SCALES = (0.6, 0.8, 1.0, 1.2)
DEFAULT_PRICE_LO = 0.08  # $/kWh
DEFAULT_PRICE_HI = 0.25
DEFAULT_REVENUE_RATE = 0.10  # $ per VM per slot
DEFAULT_SUPPLY_FRACTION = 0.3  # of each DC's full-capacity draw
# Base-price draw: kept well below the cap so the billing grid has markup
# headroom on every bus.  A base price at the cap pins the shared reference
# at zero markup, which starves the no-cooperation baseline of revenue and
# leaves the whole gap between cap and base price to the policy's per-state
# extraction.
DEFAULT_BASE_PRICE_LO = 0.10
DEFAULT_BASE_PRICE_HI = 0.14
# Price sensitivity: the default beta spans the band's half-width over a
# swing of one supply level, so the action grid moves prices across the
# whole legal range.
DEFAULT_BETA_BAND_FRACTION = 1.0
MAX_ACTIONS = 64


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate."""


@dataclass
class Scenario:
    """A complete experiment input; all cross-references must resolve."""

    providers: dict          # id -> DataCenterSpec
    bus_params: dict         # bus -> (beta, base_price $/kWh)
    price_lo: float
    price_hi: float
    alpha1: float
    alpha2: float
    supply: dict             # bus -> array of kW, one per slot
    migration: MigrationCostMatrix
    dynamics: DynamicsParams
    horizon: int
    workload: dict           # provider id -> integer array, one per slot
    seed: int
    k_norm: float = None     # None: mismatch priced at the cap rate
    action_scales: tuple = DEFAULT_SCALES
    exact_pivot: int = None  # None: allocation-module default

    def __post_init__(self):
        if not self.providers:
            raise ScenarioError("provider list is empty")
        for j, spec in self.providers.items():
            if spec.bus not in self.bus_params:
                raise ScenarioError(f"provider {j}: no pricing for bus {spec.bus}")
            if spec.bus not in self.supply:
                raise ScenarioError(f"provider {j}: no supply for bus {spec.bus}")
        for bus, g in self.supply.items():
            if len(g) != self.horizon:
                raise ScenarioError(
                    f"bus {bus}: supply has {len(g)} slots, horizon is {self.horizon}"
                )
        for j in self.providers:
            w = self.workload.get(j)
            if w is None or len(w) != self.horizon:
                raise ScenarioError(
                    f"provider {j}: workload must cover all {self.horizon} slots"
                )
            if any(x < 0 or x > self.providers[j].capacity for x in w):
                raise ScenarioError(
                    f"provider {j}: workload outside [0, capacity]"
                )
        if len(self.action_scales) > MAX_ACTIONS:
            raise ScenarioError(f"action grid larger than {MAX_ACTIONS}")

    @property
    def n_providers(self):
        return len(self.providers)

    def nocoop_reference(self, slot: int) -> dict:
        """Per-bus billing reference: each DC's own-workload power draw."""
        ref = {bus: 0.0 for bus in self.bus_params}
        for j, spec in self.providers.items():
            ref[spec.bus] += power_draw(spec, int(self.workload[j][slot])).power
        return ref

    def k_norm_for(self, slot: int) -> float:
        if self.k_norm is not None:
            return self.k_norm
        # supply-weighted average of the cap rate, which is the cap itself:
        # every kW of mismatch is priced at price_hi
        return self.price_hi

    def slot_model(self, slot: int) -> SlotModel:
        if not (0 <= slot < self.horizon):
            raise ScenarioError(f"slot {slot} outside horizon {self.horizon}")
        grid = GridSpec(
            supply={bus: float(g[slot]) for bus, g in self.supply.items()},
            alpha1=self.alpha1,
            alpha2=self.alpha2,
            k_norm=self.k_norm_for(slot),
        )
        return SlotModel(
            specs=self.providers,
            workloads={j: int(self.workload[j][slot]) for j in self.providers},
            bus_params=self.bus_params,
            price_lo=self.price_lo,
            price_hi=self.price_hi,
            grid=grid,
            migration=self.migration,
            dyn_params=self.dynamics,
            action_grid=build_action_grid(
                self.nocoop_reference(slot), self.action_scales
            ),
            exact_pivot=self.exact_pivot,
        )


def diurnal_profile(low=0.3, high=0.8, trough_hour=4, hours=24):
    """Sinusoidal load fractions of aggregate capacity, one per hour."""
    mid = (low + high) / 2.0
    amp = (high - low) / 2.0
    peak = (trough_hour + hours // 2) % hours
    return tuple(
        mid + amp * math.sin(2.0 * math.pi * (h - (peak - hours // 4)) / hours)
        for h in range(hours)
    )


def generate_trace(specs, profile, rng, concentration=50.0):
    """Per-provider integer workload matrix from hourly load fractions.

    Each hour's total is the fraction of aggregate capacity; the split
    across providers is a capacity-weighted Dirichlet draw, with overflow
    beyond any single capacity redistributed to providers with headroom.
    """
    ids = sorted(specs)
    caps = np.array([specs[j].capacity for j in ids], dtype=float)
    total_cap = caps.sum()
    horizon = len(profile)
    out = {j: np.zeros(horizon, dtype=int) for j in ids}
    for t, frac in enumerate(profile):
        if not (0.0 <= frac <= 1.0):
            raise ScenarioError(f"trace fraction {frac} at slot {t} outside [0, 1]")
        total = int(round(frac * total_cap))
        alpha = concentration * caps / total_cap
        shares = rng.dirichlet(alpha)
        w = np.floor(total * shares).astype(int)
        # hand out the rounding remainder, then push overflow to headroom
        for _ in range(total - w.sum()):
            room = np.flatnonzero(w < caps)
            w[room[np.argmax(shares[room])]] += 1
        over = w - caps.astype(int)
        while (over > 0).any():
            src = int(np.argmax(over))
            spill = over[src]
            w[src] -= spill
            room = np.flatnonzero(w < caps.astype(int))
            room = room[room != src]
            quota = (caps.astype(int) - w)[room]
            take = np.minimum(quota, np.ceil(spill * quota / quota.sum()).astype(int))
            take[np.cumsum(take) > spill] = 0
            if take.sum() < spill:
                for idx in np.argsort(-quota):
                    add = min(spill - take.sum(), quota[idx] - take[idx])
                    take[idx] += add
                    if take.sum() == spill:
                        break
            w[room] += take
            over = w - caps.astype(int)
        for idx, j in enumerate(ids):
            out[j][t] = w[idx]
    return out


def trace_from_csv(path, hours=24):
    """Load ``slot,total_fraction`` rows as an hourly profile."""
    fractions = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            fractions[int(row["slot"])] = float(row["total_fraction"])
    missing = [h for h in range(hours) if h not in fractions]
    if missing:
        raise ScenarioError(f"trace CSV missing slots {missing}")
    return tuple(fractions[h] for h in range(hours))


_PAPER6_ROWS = [
    # id, hosts, vms/host, pue, p_idle, p_peak
    (1, 15000, 1, 1.3, 0.086, 0.274),
    (2, 12000, 2, 1.5, 0.143, 0.518),
    (3, 10000, 3, 1.3, 0.490, 1.117),
    (4, 20000, 1, 1.6, 0.086, 0.274),
    (5, 15000, 2, 1.8, 0.143, 0.518),
    (6, 10000, 3, 1.1, 0.490, 1.117),
]


def paper6(seed=2024, horizon=24, action_scales=DEFAULT_SCALES) -> Scenario:
    """Built-in six-DC preset with seeded synthetic prices, supply, trace."""
    rng = np.random.default_rng(seed)
    providers = {
        row[0]: DataCenterSpec(
            id=row[0], bus=row[0], hosts=row[1], vms_per_host=row[2],
            pue=row[3], p_idle=row[4], p_peak=row[5],
            revenue_rate=DEFAULT_REVENUE_RATE,
        )
        for row in _PAPER6_ROWS
    }
    supply = {}
    bus_params = {}
    for j, spec in providers.items():
        full_draw = power_draw(spec, spec.capacity).power
        g = DEFAULT_SUPPLY_FRACTION * full_draw
        supply[spec.bus] = np.full(horizon, g)
        beta = DEFAULT_BETA_BAND_FRACTION * (
            DEFAULT_PRICE_HI - DEFAULT_PRICE_LO) / (2.0 * g)
        z = float(rng.uniform(DEFAULT_BASE_PRICE_LO, DEFAULT_BASE_PRICE_HI))
        bus_params[spec.bus] = (beta, z)
    migration = MigrationCostMatrix.sample(sorted(providers), rng)
    workload = generate_trace(providers, diurnal_profile()[:horizon], rng)
    return Scenario(
        providers=providers,
        bus_params=bus_params,
        price_lo=DEFAULT_PRICE_LO,
        price_hi=DEFAULT_PRICE_HI,
        alpha1=0.3,
        alpha2=0.7,
        supply=supply,
        migration=migration,
        dynamics=DynamicsParams(),
        horizon=horizon,
        workload=workload,
        seed=seed,
        action_scales=tuple(action_scales),
    )


def _parse_price(text):
    text = text.strip()
    if text.endswith("c"):
        return float(text[:-1]) / 100.0
    return float(text)


def _parse_kv(text, field_name):
    out = {}
    for token in text.split():
        if "=" not in token:
            raise ScenarioError(f"{field_name}: expected key=value, got '{token}'")
        k, v = token.split("=", 1)
        out[k] = v
    return out


def load_scenario(source, seed=None) -> Scenario:
    """Load a scenario from a file path, or a named preset ('paper6').

    ``seed`` overrides the preset/file seed for every random ingredient
    (base prices, migration times, trace split).
    """
    if source == "paper6":
        return paper6() if seed is None else paper6(seed=seed)
    cp = configparser.ConfigParser()
    read = cp.read(source)
    if not read:
        raise ScenarioError(f"cannot read scenario file {source}")

    meta = cp["meta"] if cp.has_section("meta") else {}
    horizon = int(meta.get("horizon", 24))
    seed = int(meta.get("seed", 2024)) if seed is None else int(seed)
    rng = np.random.default_rng(seed)

    if not cp.has_section("providers") or not cp["providers"]:
        raise ScenarioError("section [providers] is missing or empty")
    providers = {}
    for key, text in cp["providers"].items():
        j = int(key)
        kv = _parse_kv(text, f"providers.{key}")
        try:
            providers[j] = DataCenterSpec(
                id=j,
                bus=int(kv.get("bus", j)),
                hosts=int(kv["hosts"]),
                vms_per_host=int(kv["vms_per_host"]),
                pue=float(kv["pue"]),
                p_idle=float(kv["p_idle"]),
                p_peak=float(kv["p_peak"]),
                revenue_rate=float(kv.get("revenue_rate", DEFAULT_REVENUE_RATE)),
            )
        except KeyError as exc:
            raise ScenarioError(f"providers.{key}: missing field {exc}") from exc

    pricing = cp["pricing"] if cp.has_section("pricing") else {}
    price_lo = _parse_price(pricing.get("price_lo", str(DEFAULT_PRICE_LO)))
    price_hi = _parse_price(pricing.get("price_hi", str(DEFAULT_PRICE_HI)))
    scales = tuple(
        float(s) for s in pricing.get(
            "scales", ",".join(str(s) for s in DEFAULT_SCALES)
        ).split(",")
    )

    grid_sec = cp["grid"] if cp.has_section("grid") else {}
    alpha1 = float(grid_sec.get("alpha1", 0.3))
    alpha2 = float(grid_sec.get("alpha2", 0.7))
    k_norm = float(grid_sec["k_norm"]) if "k_norm" in grid_sec else None
    supply_fraction = float(grid_sec.get("supply_fraction", DEFAULT_SUPPLY_FRACTION))

    supply = {}
    bus_params = {}
    for j, spec in providers.items():
        bus = spec.bus
        if bus in supply:
            continue
        if str(bus) in grid_sec:
            supply[bus] = np.full(horizon, float(grid_sec[str(bus)]))
        else:
            full_draw = power_draw(spec, spec.capacity).power
            supply[bus] = np.full(horizon, supply_fraction * full_draw)
        if str(bus) in pricing:
            kv = _parse_kv(pricing[str(bus)], f"pricing.{bus}")
            beta = float(kv["beta"])
            z = _parse_price(kv["base_price"])
        else:
            beta = DEFAULT_BETA_BAND_FRACTION * (price_hi - price_lo) / (
                2.0 * float(supply[bus][0]))
            z_lo = max(price_lo, DEFAULT_BASE_PRICE_LO)
            z_hi = min(price_hi, DEFAULT_BASE_PRICE_HI)
            if z_lo >= z_hi:  # custom band excludes the default window
                z_lo, z_hi = price_lo, price_hi
            z = float(rng.uniform(z_lo, z_hi))
        bus_params[bus] = (beta, z)

    dyn_sec = cp["dynamics"] if cp.has_section("dynamics") else {}
    dynamics = DynamicsParams(
        sigma=float(dyn_sec.get("sigma", 0.5)),
        rho=float(dyn_sec.get("rho", 0.99)),
        epsilon=float(dyn_sec.get("epsilon", 0.01)),
    )

    mig_sec = cp["migration"] if cp.has_section("migration") else {}
    mode = mig_sec.get("mode", "sample")
    if mode == "zero":
        migration = MigrationCostMatrix.zero(sorted(providers))
    elif mode == "sample":
        migration = MigrationCostMatrix.sample(
            sorted(providers), rng,
            cost_per_gb=float(mig_sec.get("cost_per_gb", 0.001)),
            rate_mbit=float(mig_sec.get("rate_mbit", 100.0)),
            time_mean=float(mig_sec.get("time_mean", 554.0)),
            time_std=float(mig_sec.get("time_std", 364.0)),
        )
    else:
        raise ScenarioError(f"migration.mode must be sample or zero, got '{mode}'")

    trace_sec = cp["trace"] if cp.has_section("trace") else {}
    profile_name = trace_sec.get("profile", "diurnal")
    if profile_name == "diurnal":
        profile = diurnal_profile(hours=horizon)
    elif profile_name.endswith(".csv"):
        profile = trace_from_csv(profile_name, hours=horizon)
    else:
        profile = tuple(float(x) for x in profile_name.split(","))
        if len(profile) != horizon:
            raise ScenarioError(
                f"trace.profile lists {len(profile)} fractions, horizon is {horizon}"
            )
    workload = generate_trace(
        providers, profile, rng,
        concentration=float(trace_sec.get("concentration", 50.0)),
    )

    return Scenario(
        providers=providers,
        bus_params=bus_params,
        price_lo=price_lo,
        price_hi=price_hi,
        alpha1=alpha1,
        alpha2=alpha2,
        supply=supply,
        migration=migration,
        dynamics=dynamics,
        horizon=horizon,
        workload=workload,
        seed=seed,
        k_norm=k_norm,
        action_scales=scales,
    )
