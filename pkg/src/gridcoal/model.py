"""Physical and economic primitives: data centers, bus pricing, grid weights, power draw."""

import math
import warnings
from dataclasses import dataclass, field


class CapacityExceededError(ValueError):
    """Raised when a data center is asked to host more VMs than it can hold."""


@dataclass(frozen=True)
class DataCenterSpec:
    """One cloud provider's data center.

    Power figures are per host, in kW.  ``revenue_rate`` is the charge per
    hosted VM per slot ($).  ``capacity`` is derived as hosts * vms_per_host.
    """

    id: int
    bus: int
    hosts: int
    vms_per_host: int
    pue: float
    p_idle: float
    p_peak: float
    revenue_rate: float

    def __post_init__(self):
        if self.hosts <= 0 or self.vms_per_host <= 0:
            raise ValueError(f"DC {self.id}: hosts and vms_per_host must be positive")
        if not (0.0 < self.p_idle < self.p_peak):
            raise ValueError(
                f"DC {self.id}: need 0 < p_idle < p_peak, got "
                f"({self.p_idle}, {self.p_peak})"
            )
        if self.pue < 1.0:
            raise ValueError(f"DC {self.id}: PUE must be >= 1.0, got {self.pue}")
        if not (1.1 <= self.pue <= 3.0):
            warnings.warn(
                f"DC {self.id}: PUE {self.pue} outside the usual [1.1, 3] range",
                stacklevel=2,
            )

    @property
    def capacity(self):
        return self.hosts * self.vms_per_host


@dataclass(frozen=True)
class BusPricing:
    """Tiered price parameters for one power bus in one slot.

    Unit price is ``beta * (power - billing_ref) + base_price`` ($/kWh);
    ``price_lo``/``price_hi`` are the contractual band the policy layer must
    respect.  All prices are stored in $/kWh.
    """

    beta: float
    base_price: float
    billing_ref: float
    price_lo: float
    price_hi: float

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.price_lo >= self.price_hi:
            raise ValueError(
                f"price band is empty: [{self.price_lo}, {self.price_hi}]"
            )


@dataclass(frozen=True)
class GridSpec:
    """Smart-grid objective weights and the mismatch normalizer.

    ``supply`` maps bus id -> max available power (kW) for the current slot.
    """

    supply: dict
    alpha1: float
    alpha2: float
    k_norm: float

    def __post_init__(self):
        if not (0.0 <= self.alpha1 <= 1.0 and 0.0 <= self.alpha2 <= 1.0):
            raise ValueError("alpha1 and alpha2 must lie in [0, 1]")
        if abs(self.alpha1 + self.alpha2 - 1.0) > 1e-9:
            raise ValueError("alpha1 + alpha2 must equal 1")
        if any(g < 0 for g in self.supply.values()):
            raise ValueError("supply must be nonnegative everywhere")


@dataclass(frozen=True)
class PowerDraw:
    """Resolved operating point of a DC: active hosts, utilization, power (kW)."""

    active_hosts: int
    utilization: float
    power: float


def electricity_price(pricing: BusPricing, power: float) -> float:
    """Unit electricity price ($/kWh) at the given power draw.

    Deliberately unclamped: enforcing the [price_lo, price_hi] band is the
    policy layer's job, so out-of-band (even negative) values are returned
    as computed.
    """
    return pricing.beta * (power - pricing.billing_ref) + pricing.base_price


def power_draw(spec: DataCenterSpec, assigned_vms: int) -> PowerDraw:
    """Power consumption of a DC hosting ``assigned_vms`` VMs.

    Hosts are consolidated: the minimum number of hosts is kept active
    (m = ceil(n / vms_per_host)) and utilization is averaged across them.
    """
    if assigned_vms < 0:
        raise ValueError(f"assigned_vms must be nonnegative, got {assigned_vms}")
    if assigned_vms > spec.capacity:
        raise CapacityExceededError(
            f"DC {spec.id}: {assigned_vms} VMs exceed capacity {spec.capacity}"
        )
    if assigned_vms == 0:
        return PowerDraw(active_hosts=0, utilization=0.0, power=0.0)
    m = math.ceil(assigned_vms / spec.vms_per_host)
    util = assigned_vms / (m * spec.vms_per_host)
    power = m * (spec.p_idle + (spec.p_peak - spec.p_idle) * util) * spec.pue
    return PowerDraw(active_hosts=m, utilization=util, power=power)
