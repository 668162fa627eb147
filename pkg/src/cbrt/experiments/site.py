"""
Static HTML report over experiment output directories.

Every ``summary.md`` under the output tree becomes one page; the SVG charts
next to it are copied alongside.
"""

from __future__ import annotations

import re
import shutil
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import markdown
import yaml
from jinja2 import Environment, FileSystemLoader, select_autoescape

TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"

env = Environment(
    loader=FileSystemLoader(TEMPLATES_DIR),
    autoescape=select_autoescape(enabled_extensions=("html.j2",)),
    keep_trailing_newline=True,
)

SITE_TITLE = "CBRT experiments"


@dataclass
class Report:
    slug: str
    title: str
    kind: str
    seed: int | str
    source: str
    html: str
    directory: Path
    charts: list[str] = field(default_factory=list)


def parse_frontmatter(content: str) -> tuple[dict, str]:
    """Parse YAML frontmatter from markdown content"""
    if content.startswith("---"):
        try:
            _, frontmatter, body = content.split("---", 2)
            metadata = yaml.safe_load(frontmatter) or {}
            return metadata, body.strip()
        except (ValueError, yaml.YAMLError):
            return {}, content
    return {}, content


def _slug(rel: Path) -> str:
    text = "-".join(rel.parts) or "results"
    return re.sub(r"[^A-Za-z0-9_-]+", "-", text).strip("-") or "results"


def collect_reports(out_dir: Path) -> list[Report]:
    reports = []
    for path in sorted(out_dir.rglob("summary.md")):
        meta, body = parse_frontmatter(path.read_text())
        # the page carries its own heading
        body = re.sub(r"\A# .*\n?", "", body).lstrip()
        rel = path.parent.relative_to(out_dir)
        slug = _slug(rel)
        reports.append(Report(
            slug=slug,
            title=str(meta.get("title", slug)),
            kind=str(meta.get("kind", "run")),
            seed=meta.get("seed", ""),
            source=str(meta.get("config", "defaults")),
            html=markdown.markdown(body, extensions=["tables"]),
            directory=path.parent,
            charts=[f"{slug}/{svg.name}" for svg in sorted(path.parent.glob("*.svg"))],
        ))
    return reports


def build_report(out_dir: str | Path, public_dir: str | Path) -> list[Path]:
    """Render every summary under out_dir into public_dir; returns the pages written."""
    out_dir, public_dir = Path(out_dir), Path(public_dir)
    if public_dir.exists():
        shutil.rmtree(public_dir)
    public_dir.mkdir(parents=True)
    built = datetime.now().strftime("%Y-%m-%d %H:%M")
    reports = collect_reports(out_dir) if out_dir.exists() else []

    pages = []
    for report in reports:
        assets = public_dir / report.slug
        assets.mkdir(exist_ok=True)
        for svg in sorted(report.directory.glob("*.svg")):
            shutil.copy2(svg, assets / svg.name)
        page = public_dir / f"{report.slug}.html"
        page.write_text(env.get_template("report.html.j2").render(
            report=report, site_title=SITE_TITLE, built=built))
        pages.append(page)

    index = public_dir / "index.html"
    index.write_text(env.get_template("index.html.j2").render(
        reports=reports, site_title=SITE_TITLE, built=built))
    pages.append(index)
    return pages
