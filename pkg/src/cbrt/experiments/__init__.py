"""Experiment sweeps, matplotlib SVG charts and the static report site."""

from cbrt.experiments.plots import Series, draw_chart, write_chart
from cbrt.experiments.runner import (
    COMPARE_COLUMNS,
    OBSERVABLES,
    Check,
    Job,
    TopoJob,
    aggregate,
    compare_charts,
    compare_checks,
    markdown_table,
    run_job,
    run_jobs,
    run_single,
    run_topo_job,
    sweep_jobs,
    topo_aggregate,
    topo_charts,
    topo_checks,
    topo_jobs,
    write_summary,
    write_topo_csv,
)
from cbrt.experiments.site import build_report, parse_frontmatter

__all__ = [
    "COMPARE_COLUMNS",
    "OBSERVABLES",
    "Check",
    "Job",
    "Series",
    "TopoJob",
    "aggregate",
    "build_report",
    "compare_charts",
    "compare_checks",
    "draw_chart",
    "markdown_table",
    "parse_frontmatter",
    "run_job",
    "run_jobs",
    "run_single",
    "run_topo_job",
    "sweep_jobs",
    "topo_aggregate",
    "topo_charts",
    "topo_checks",
    "topo_jobs",
    "write_chart",
    "write_summary",
    "write_topo_csv",
]
