"""Catalog of benchmark economies with analytic oracles and property suites."""

from __future__ import annotations

from .agency import register_principal_agent
from .allocation import register_pareto_allocation
from .base import BenchmarkEntry, BenchRun
from .multi_output import register_cost_constrained_profit, register_multi_output_profit
from .portfolio import register_efficient_portfolio
from .profit import register_profit_max
from .slutsky import register_slutsky_hicks
from .utility import register_market_power, register_multi_constraint_utility

_REGISTRARS = {
    "slutsky_hicks": register_slutsky_hicks,
    "profit_cd": register_profit_max,
    "multi_output_profit": register_multi_output_profit,
    "cost_constrained_profit": register_cost_constrained_profit,
    "multi_constraint_utility": register_multi_constraint_utility,
    "market_power": register_market_power,
    "principal_agent": register_principal_agent,
    "efficient_portfolio": register_efficient_portfolio,
    "pareto_allocation": register_pareto_allocation,
}

_CACHE: dict = {}


def benchmark_names() -> tuple:
    return tuple(_REGISTRARS)


def get_benchmark(name: str) -> BenchmarkEntry:
    if name not in _REGISTRARS:
        raise KeyError(f"unknown benchmark {name!r}; known: {', '.join(_REGISTRARS)}")
    if name not in _CACHE:
        _CACHE[name] = _REGISTRARS[name]()
    return _CACHE[name]


def all_benchmarks():
    return [get_benchmark(name) for name in benchmark_names()]


__all__ = [
    "BenchmarkEntry", "BenchRun", "benchmark_names", "get_benchmark",
    "all_benchmarks",
    "register_slutsky_hicks", "register_profit_max",
    "register_multi_output_profit", "register_cost_constrained_profit",
    "register_multi_constraint_utility", "register_market_power",
    "register_principal_agent", "register_efficient_portfolio",
    "register_pareto_allocation",
]
