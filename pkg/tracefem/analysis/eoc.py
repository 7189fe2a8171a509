"""
This module contains the experimental orders of convergence of error sequences and their tables.
"""
import math
from typing import Iterator, Sequence

from tracefem.analysis.norms import ErrorReport

NORMS = ('l2', 'h1', 'linf')

NORM_TITLES = {'l2': 'L2 error', 'h1': 'H1 error', 'linf': 'Linf error'}


def rate(e_prev: float, e_cur: float, h_prev: float, h_cur: float) -> float | None:
    """
    log(e_prev / e_cur) / log(h_prev / h_cur); None when undefined.
    """
    if e_prev <= 0.0 or e_cur <= 0.0 or h_prev == h_cur:
        return None
    return math.log(e_prev / e_cur) / math.log(h_prev / h_cur)


def dof_rate(e_prev: float, e_cur: float, n_prev: int, n_cur: int) -> float | None:
    """
    2 log(e_prev / e_cur) / log(n_cur / n_prev), the order in h = N^(-1/2) of a dof-based sequence.
    """
    if e_prev <= 0.0 or e_cur <= 0.0 or n_prev == n_cur:
        return None
    return 2.0 * math.log(e_prev / e_cur) / math.log(n_cur / n_prev)


def eoc_rates(reports: Sequence[ErrorReport], norm: str = 'l2', by: str = 'h') -> list[float | None]:
    """
    Rates of a sequence of reports; the first entry is None.
    Args:
        reports: Reports of successive grids.
        norm: l2, h1, h1_semi or linf.
        by: h for uniform sequences, dofs for adaptive ones.
    returns:
        One rate per report.
    """
    rates = [None]
    for previous, current in zip(reports, reports[1:]):
        e_prev, e_cur = getattr(previous, norm), getattr(current, norm)
        if by == 'h':
            rates.append(rate(e_prev, e_cur, previous.h_max, current.h_max))
        else:
            rates.append(dof_rate(e_prev, e_cur, previous.dofs, current.dofs))
    return rates


def eoc_rows(reports: Sequence[ErrorReport], variant: str = '', by: str = 'h') -> list[dict]:
    """
    CSV rows: dofs, h, then each norm followed by its rate.
    """
    rates = {norm: eoc_rates(reports, norm, by) for norm in NORMS}
    rows = []
    for n, report in enumerate(reports):
        row = {'variant': variant, 'level': n, 'dofs': report.dofs, 'h': report.h_max}
        for norm in NORMS:
            row[norm] = getattr(report, norm)
            row[f'{norm}_rate'] = '' if rates[norm][n] is None else rates[norm][n]
        rows.append(row)
    return rows


def eoc_table(reports: Sequence[ErrorReport], by: str = 'h', title: str | None = None) -> Iterator[str]:
    """
    Human-readable table: #d.o.f. followed by each error and its rate.
    """
    rates = {norm: eoc_rates(reports, norm, by) for norm in NORMS}
    if title:
        yield title
    header = f'{"#d.o.f.":>10}'
    for norm in NORMS:
        header += f' {NORM_TITLES[norm]:>12} {"rate":>6}'
    yield header
    for n, report in enumerate(reports):
        line = f'{report.dofs:>10}'
        for norm in NORMS:
            value = rates[norm][n]
            line += f' {getattr(report, norm):>12.3e} {"" if value is None else f"{value:.2f}":>6}'
        yield line
