"""Synthetic dataset generation, CSV interchange, and config/report files.

The generator emulates a tropical island's year: load follows a smooth
daytime-peaked diurnal curve inside its band, PV follows a clear-sky bell
(strictly zero outside 06-19h) scaled per day type and punched down by
per-hour cloud dropouts, which produce the heavy hour-to-hour variance the
real data shows. Everything is deterministic per seed.

Interchange formats:
* profiles CSV: header ``day,hour,load_kw,pv_kw``, one row per hour, days
  0-indexed, hours 0-23 in order;
* config JSON: ``{"microgrid": {...}, "tariff": {"hourly_price": [...]}}``
  mirroring the dataclass field names;
* report JSON: the dict produced by `report_to_dict` (ledger rows keyed by
  day/hour plus the aggregate block);
* commitment JSON: four 24-value schedules plus the per-hour buy flag.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from microdispatch.controllers import SimulationReport
from microdispatch.domain import (
    HOURS_PER_DAY,
    Commitment,
    DayProfile,
    MicrogridConfig,
    TariffSchedule,
)

MONTH_LENGTHS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
PV_DAWN_HOUR = 6       # first hour with any generation
PV_DUSK_HOUR = 19      # last hour with any generation


class DataFormatError(ValueError):
    """Malformed interchange file; the message carries the location."""


@dataclass(frozen=True)
class SyntheticParams:
    seed: int = 0
    days: int = 365
    load_band: tuple = (5000.0, 10000.0)
    pv_nameplate_kw: float = 15000.0
    sunny_weight: float = 0.55
    cloud_rate_sunny: float = 0.12
    cloud_rate_cloudy: float = 0.45
    cloud_depth: tuple = (0.15, 0.85)

    def __post_init__(self):
        lo, hi = self.load_band
        if not (0 < lo < hi):
            raise ValueError("load band must be positive and ordered")
        if self.pv_nameplate_kw <= 0:
            raise ValueError("pv nameplate must be positive")
        if not (0.0 <= self.sunny_weight <= 1.0):
            raise ValueError("day-type weights must form a mixture")
        d_lo, d_hi = self.cloud_depth
        if not (0.0 <= d_lo <= d_hi <= 1.0):
            raise ValueError("cloud depth range must sit inside [0, 1]")


def _clear_sky(hours: np.ndarray) -> np.ndarray:
    """Unit-height irradiance bell, exactly zero outside daylight."""
    shape = np.sin(np.pi * (hours + 0.5 - PV_DAWN_HOUR) / (PV_DUSK_HOUR + 1 - PV_DAWN_HOUR))
    shape[(hours < PV_DAWN_HOUR) | (hours > PV_DUSK_HOUR)] = 0.0
    return np.clip(shape, 0.0, None)


def generate_dataset(params: SyntheticParams) -> list[DayProfile]:
    """Seeded synthetic year of paired daily load/PV profiles."""
    rng = np.random.default_rng(params.seed)
    hours = np.arange(HOURS_PER_DAY, dtype=float)
    lo, hi = params.load_band
    band = hi - lo
    diurnal = np.exp(-((hours - 13.5) / 4.8) ** 2)
    clear = _clear_sky(hours)
    daylight = clear > 0

    days = []
    for _ in range(params.days):
        day_scale = rng.uniform(0.97, 1.03)
        load = (lo + 0.06 * band
                + 0.78 * band * diurnal * day_scale
                + rng.normal(0.0, 0.02 * band, size=HOURS_PER_DAY))
        load = np.clip(load, lo, hi)

        sunny = rng.random() < params.sunny_weight
        pv_scale = rng.uniform(0.75, 1.0) if sunny else rng.uniform(0.25, 0.60)
        cloud_rate = params.cloud_rate_sunny if sunny else params.cloud_rate_cloudy
        dropout = np.ones(HOURS_PER_DAY)
        hit = daylight & (rng.random(HOURS_PER_DAY) < cloud_rate)
        dropout[hit] = 1.0 - rng.uniform(*params.cloud_depth, size=int(hit.sum()))
        pv = np.clip(params.pv_nameplate_kw * pv_scale * clear * dropout,
                     0.0, params.pv_nameplate_kw)
        days.append(DayProfile(load_kw=load, pv_kw=pv))
    return days


def split_train_test(days, train_months: int = 11):
    """Calendar split of a 365-day year: first `train_months` months train.

    Shorter datasets split proportionally by whole days.
    """
    if len(days) == 365:
        cut = sum(MONTH_LENGTHS[:train_months])
    else:
        cut = max(1, min(len(days) - 1, round(len(days) * train_months / 12)))
    return list(days[:cut]), list(days[cut:])


def trailing_train_months(days, months: int):
    """The last `months` months of the 11-month training span (365-day year)."""
    if len(days) != 365:
        raise ValueError("month arithmetic needs a full 365-day year")
    if not (1 <= months <= 11):
        raise ValueError("months must be in 1..11")
    end = sum(MONTH_LENGTHS[:11])
    start = sum(MONTH_LENGTHS[:11 - months])
    return list(days[start:end])


# ---------------------------------------------------------------------------
# profiles CSV

PROFILE_HEADER = ["day", "hour", "load_kw", "pv_kw"]


def write_profiles(days, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_HEADER)
        for d, day in enumerate(days):
            for h in range(HOURS_PER_DAY):
                writer.writerow([d, h, repr(float(day.load_kw[h])),
                                 repr(float(day.pv_kw[h]))])


def read_profiles(path) -> list[DayProfile]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if [c.strip() for c in header] != PROFILE_HEADER:
            raise DataFormatError(f"{path}: expected header {','.join(PROFILE_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                day, hour = int(row[0]), int(row[1])
                load, pv = float(row[2]), float(row[3])
            except (ValueError, IndexError) as exc:
                raise DataFormatError(f"{path}:{lineno}: unparseable row {row!r}") from exc
            if load < 0 or pv < 0:
                raise DataFormatError(f"{path}:{lineno}: negative power")
            rows.append((day, hour, load, pv, lineno))
    if not rows:
        raise DataFormatError(f"{path}: no data rows (header only)")

    days: list[DayProfile] = []
    by_day: dict[int, list] = {}
    for day, hour, load, pv, lineno in rows:
        by_day.setdefault(day, []).append((hour, load, pv, lineno))
    for day in range(len(by_day)):
        if day not in by_day:
            raise DataFormatError(f"{path}: day indices must be consecutive, missing {day}")
        entries = by_day[day]
        if len(entries) != HOURS_PER_DAY:
            raise DataFormatError(
                f"{path}: day {day} has {len(entries)} rows, expected {HOURS_PER_DAY}")
        entries.sort(key=lambda e: e[0])
        if [e[0] for e in entries] != list(range(HOURS_PER_DAY)):
            raise DataFormatError(f"{path}: day {day} does not cover hours 0..23")
        days.append(DayProfile(load_kw=np.array([e[1] for e in entries]),
                               pv_kw=np.array([e[2] for e in entries])))
    return days


# ---------------------------------------------------------------------------
# config JSON


def save_config(config: MicrogridConfig, tariff: TariffSchedule, path) -> None:
    payload = {"microgrid": dataclasses.asdict(config),
               "tariff": {"hourly_price": list(tariff.hourly_price)}}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def load_config(path) -> tuple[MicrogridConfig, TariffSchedule]:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        grid_fields = payload["microgrid"]
        tariff_fields = payload["tariff"]
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: config needs 'microgrid' and 'tariff' blocks") from exc
    known = {f.name for f in dataclasses.fields(MicrogridConfig)}
    unknown = set(grid_fields) - known
    if unknown:
        raise DataFormatError(f"{path}: unknown microgrid fields {sorted(unknown)}")
    try:
        config = MicrogridConfig(**grid_fields)
        tariff = TariffSchedule(hourly_price=tuple(tariff_fields["hourly_price"]))
    except (TypeError, ValueError, KeyError) as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    return config, tariff


# ---------------------------------------------------------------------------
# commitment JSON


def commitment_to_dict(commitment: Commitment) -> dict:
    return {
        "grid_buy_kw": commitment.grid_buy_kw.tolist(),
        "grid_sell_kw": commitment.grid_sell_kw.tolist(),
        "reserve_down_kw": commitment.reserve_down_kw.tolist(),
        "reserve_up_kw": commitment.reserve_up_kw.tolist(),
        "buying": [bool(b) for b in commitment.buying],
    }


def commitment_from_dict(payload: dict) -> Commitment:
    try:
        return Commitment(
            grid_buy_kw=np.array(payload["grid_buy_kw"], dtype=float),
            grid_sell_kw=np.array(payload["grid_sell_kw"], dtype=float),
            reserve_down_kw=np.array(payload["reserve_down_kw"], dtype=float),
            reserve_up_kw=np.array(payload["reserve_up_kw"], dtype=float),
            buying=np.array(payload["buying"], dtype=bool),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise DataFormatError(f"commitment payload invalid: {exc}") from exc


def save_commitment(commitment: Commitment, path) -> None:
    with open(path, "w") as fh:
        json.dump(commitment_to_dict(commitment), fh)


def load_commitment(path) -> Commitment:
    with open(path) as fh:
        return commitment_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# report serialization


def report_to_dict(report: SimulationReport) -> dict:
    ledger = []
    for r in report.records:
        led = r.outcome.ledger
        ledger.append({
            "day": r.day_index,
            "hour": r.state.hour_of_day,
            "soc_kwh": r.state.soc_kwh,
            "soc_end_kwh": r.outcome.soc_kwh,
            "load_kw": led.load_kw,
            "pv_kw": led.pv_kw,
            "grid_buy_kw": led.grid_buy_kw,
            "grid_sell_kw": led.grid_sell_kw,
            "reserve_down_kw": led.reserve_down_kw,
            "reserve_up_kw": led.reserve_up_kw,
            "dg_kw": led.dg_kw,
            "ess_charge_kw": led.ess_charge_kw,
            "ess_discharge_kw": led.ess_discharge_kw,
            "step_cost": r.outcome.step_cost,
            "curtailed_kw": r.outcome.curtailed_kw,
            "blackout": r.outcome.blackout,
            "decision_seconds": r.decision_seconds,
        })
    return {
        "controller": report.controller,
        "hours": report.hours,
        "total_cost": report.total_cost,
        "average_hourly_cost": report.average_hourly_cost,
        "average_hourly_dg_cost": report.average_hourly_dg_cost,
        "daily_costs": report.daily_costs.tolist(),
        "blackout_count": report.blackout_count,
        "curtailed_kwh": report.curtailed_kwh,
        "mean_decision_seconds": report.mean_decision_seconds,
        "ledger": ledger,
    }


def write_report_json(report: SimulationReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report_to_dict(report), fh)


def write_trace_csv(report: SimulationReport, path) -> None:
    """Per-hour trace (SOC, dispatch, grid, costs) for external plotting."""
    rows = report_to_dict(report)["ledger"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def write_daywise_csv(reports: dict[str, SimulationReport], path) -> None:
    names = list(reports)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["day"] + names)
        n_days = min(len(reports[n].daily_costs) for n in names)
        for d in range(n_days):
            writer.writerow([d] + [repr(float(reports[n].daily_costs[d])) for n in names])


def write_summary_csv(reports: dict[str, SimulationReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["controller", "average_hourly_cost", "average_hourly_dg_cost",
                         "blackout_count", "curtailed_kwh", "mean_decision_seconds"])
        for name, report in reports.items():
            writer.writerow([
                name,
                f"{report.average_hourly_cost:.6f}",
                f"{report.average_hourly_dg_cost:.6f}",
                report.blackout_count,
                f"{report.curtailed_kwh:.3f}",
                f"{report.mean_decision_seconds:.6f}",
            ])
