"""LaTeX paper ingestion.

Parses a paper's LaTeX sources into a structured record: title, abstract,
section tree, figure environments (caption, label, graphics path), and
per-section figure references. No TeX rendering: regex + brace scanning,
tolerant of messy real-world sources (problems are logged, not fatal).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import SCHEMA, AnchorParagraph
from .errors import MissingAbstract, NoMainFile, UnknownFigure, UnreadableSource
from .jsonio import sha256_file

logger = logging.getLogger(__name__)

DOMAIN_TAGS = ("nlp", "ml", "astronomy", "other")

# Sections from this point on hold results/analysis content; earlier sections
# introduce the problem and their figures are overview material.
DEFAULT_RESULTS_LEXICON = (
    "result", "experiment", "evaluation", "analysis", "discussion", "finding",
)

SECTION_RE = re.compile(r"\\section\*?\s*(?:\[[^\]]*\])?\s*\{")
APPENDIX_RE = re.compile(r"\\appendix\b")
INPUT_RE = re.compile(r"\\(?:input|include)\s*\{([^}]+)\}")
BEGIN_DOC_RE = re.compile(r"\\begin\{document\}")
END_DOC_RE = re.compile(r"\\end\{document\}")
FIGURE_BEGIN_RE = re.compile(r"\\begin\{(figure\*?)\}")
ENV_BEGIN_RE = re.compile(r"\\begin\{(\w+\*?)\}")
REF_RE = re.compile(r"\\(?:ref|autoref|cref|Cref|figref)\s*\{([^}]+)\}")
CITE_RE = re.compile(r"\\cite[a-zA-Z]*\s*(?:\[[^\]]*\])?\s*\{([^}]+)\}")
LABEL_RE = re.compile(r"\\label\s*\{([^}]+)\}")
GRAPHICS_RE = re.compile(r"\\includegraphics\s*(?:\[[^\]]*\])?\s*\{([^}]+)\}")

# Inline wrappers whose argument is kept; commands whose argument is dropped.
UNWRAP_COMMANDS = ("textbf", "textit", "emph", "texttt", "textsc", "textrm",
                   "text", "mbox", "underline")
DROP_COMMANDS = ("footnote", "vspace", "hspace", "label", "caption")


@dataclass
class SectionNode:
    title: str
    ordinal: int
    is_appendix: bool
    paragraphs: list[str] = field(default_factory=list)
    # figure labels referenced by each paragraph, parallel to `paragraphs`
    paragraph_refs: list[list[str]] = field(default_factory=list)

    @property
    def figure_refs(self) -> list[str]:
        """Multiset of referenced figure labels, in document order."""
        return [label for refs in self.paragraph_refs for label in refs]

    def to_json(self) -> dict:
        return {"title": self.title, "ordinal": self.ordinal,
                "is_appendix": self.is_appendix, "paragraphs": self.paragraphs,
                "paragraph_refs": self.paragraph_refs}

    @classmethod
    def from_json(cls, obj: dict) -> "SectionNode":
        return cls(title=obj["title"], ordinal=obj["ordinal"],
                   is_appendix=obj["is_appendix"], paragraphs=obj["paragraphs"],
                   paragraph_refs=obj["paragraph_refs"])


@dataclass
class FigureUnit:
    label: str
    caption: str
    image_path: str
    declared_in_section: int
    eligible: bool = False
    reference_count: int = 0

    def to_json(self) -> dict:
        return {"label": self.label, "caption": self.caption,
                "image_path": self.image_path,
                "declared_in_section": self.declared_in_section,
                "eligible": self.eligible, "reference_count": self.reference_count}

    @classmethod
    def from_json(cls, obj: dict) -> "FigureUnit":
        return cls(label=obj["label"], caption=obj["caption"],
                   image_path=obj["image_path"],
                   declared_in_section=obj["declared_in_section"],
                   eligible=obj["eligible"], reference_count=obj["reference_count"])


@dataclass
class PaperRecord:
    paper_id: str
    title: str
    abstract: str
    sections: list[SectionNode]
    figures: list[FigureUnit]
    domain_tag: str = "other"
    dangling_refs: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def figure(self, label: str) -> FigureUnit:
        for fig in self.figures:
            if fig.label == label:
                return fig
        raise UnknownFigure(f"{self.paper_id}: no figure labeled {label!r}")

    def eligible_figures(self) -> list[FigureUnit]:
        return [f for f in self.figures if f.eligible]

    def to_json(self) -> dict:
        return {"schema": SCHEMA, "paper_id": self.paper_id, "title": self.title,
                "abstract": self.abstract,
                "sections": [s.to_json() for s in self.sections],
                "figures": [f.to_json() for f in self.figures],
                "domain_tag": self.domain_tag, "dangling_refs": self.dangling_refs,
                "warnings": self.warnings}

    @classmethod
    def from_json(cls, obj: dict) -> "PaperRecord":
        return cls(paper_id=obj["paper_id"], title=obj["title"],
                   abstract=obj["abstract"],
                   sections=[SectionNode.from_json(s) for s in obj["sections"]],
                   figures=[FigureUnit.from_json(f) for f in obj["figures"]],
                   domain_tag=obj.get("domain_tag", "other"),
                   dangling_refs=obj.get("dangling_refs", []),
                   warnings=obj.get("warnings", []))


# =============================================================================
# Low-level LaTeX scanning
# =============================================================================

def strip_comments(source: str) -> str:
    """Remove % comments, keeping escaped \\%."""
    out_lines = []
    for line in source.split("\n"):
        result = []
        i = 0
        while i < len(line):
            ch = line[i]
            if ch == "\\" and i + 1 < len(line):
                result.append(line[i:i + 2])
                i += 2
                continue
            if ch == "%":
                break
            result.append(ch)
            i += 1
        out_lines.append("".join(result))
    return "\n".join(out_lines)


def read_braced(text: str, open_idx: int) -> tuple[str, int]:
    """Read a balanced {...} group starting at `open_idx`; returns (content, end)."""
    if open_idx >= len(text) or text[open_idx] != "{":
        raise ValueError(f"expected '{{' at index {open_idx}")
    depth = 0
    i = open_idx
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[open_idx + 1:i], i + 1
        i += 1
    raise ValueError("unbalanced braces")


def extract_command_arg(source: str, command: str) -> str | None:
    """First balanced argument of \\command{...}, skipping an optional [..]."""
    pattern = re.compile(r"\\" + command + r"\s*(?:\[[^\]]*\])?\s*\{")
    match = pattern.search(source)
    if match is None:
        return None
    try:
        content, _ = read_braced(source, match.end() - 1)
    except ValueError:
        return None
    return content


def find_environment(source: str, name: str, start: int = 0) -> tuple[int, int, str] | None:
    """Next \\begin{name}...\\end{name} block at or after `start`.

    Returns (begin_idx, end_idx_after, inner) or None. Handles the starred
    variant when `name` ends with an explicit '*'.
    """
    begin = source.find(f"\\begin{{{name}}}", start)
    if begin < 0:
        return None
    end_tag = f"\\end{{{name}}}"
    end = source.find(end_tag, begin)
    if end < 0:
        return None
    inner = source[begin + len(f"\\begin{{{name}}}"):end]
    return begin, end + len(end_tag), inner


def _drop_command_with_arg(text: str, command: str) -> str:
    pattern = re.compile(r"\\" + command + r"\*?\s*(?:\[[^\]]*\])?\s*\{")
    while True:
        match = pattern.search(text)
        if match is None:
            return text
        try:
            _, end = read_braced(text, match.end() - 1)
        except ValueError:
            return text[:match.start()] + text[match.end():]
        text = text[:match.start()] + text[end:]


def _unwrap_command(text: str, command: str) -> str:
    pattern = re.compile(r"\\" + command + r"\s*\{")
    while True:
        match = pattern.search(text)
        if match is None:
            return text
        try:
            content, end = read_braced(text, match.end() - 1)
        except ValueError:
            return text
        text = text[:match.start()] + content + text[end:]


def clean_text(latex: str) -> str:
    """Flatten a LaTeX fragment into plain-ish text.

    References become bracketed labels, citations become parenthesized keys,
    math source is left as-is (rendering is out of scope here).
    """
    text = latex.replace("~", " ")
    text = REF_RE.sub(lambda m: f"[{m.group(1)}]", text)
    text = CITE_RE.sub(lambda m: f"({m.group(1)})", text)
    for command in DROP_COMMANDS:
        text = _drop_command_with_arg(text, command)
    for command in UNWRAP_COMMANDS:
        text = _unwrap_command(text, command)
    # bare formatting commands with no argument
    text = re.sub(r"\\(?:centering|noindent|small|large|Large|maketitle|item|"
                  r"midrule|toprule|bottomrule|hline|par|linewidth|textwidth|"
                  r"columnwidth|clearpage|newpage|leftmargin)\b\*?", " ", text)
    text = re.sub(r"\\\\(\[[^\]]*\])?", " ", text)
    return " ".join(text.split())


# =============================================================================
# Source resolution
# =============================================================================

def _find_main_file(source_dir: Path) -> Path:
    candidates = sorted(source_dir.glob("*.tex"))
    if not candidates:
        raise NoMainFile(f"{source_dir}: no top-level .tex file")
    with_doc = [p for p in candidates if BEGIN_DOC_RE.search(_read(p))]
    if not with_doc:
        raise NoMainFile(f"{source_dir}: no .tex file contains a document body")
    if len(with_doc) > 1:
        classed = [p for p in with_doc if "\\documentclass" in _read(p)]
        if classed:
            with_doc = classed
    return with_doc[0]


def _read(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise UnreadableSource(f"cannot read {path}: {exc}") from exc


def expand_inputs(source: str, base_dir: Path, warnings: list[str],
                  _depth: int = 0) -> str:
    """Inline \\input/\\include files, recursively, relative to base_dir."""
    if _depth > 8:
        warnings.append("input expansion depth limit reached")
        return source

    def replace(match: re.Match) -> str:
        name = match.group(1).strip()
        candidate = base_dir / name
        if candidate.suffix != ".tex":
            candidate = candidate.with_suffix(".tex")
        if not candidate.exists():
            warnings.append(f"missing input file: {name}")
            return ""
        return expand_inputs(strip_comments(_read(candidate)), base_dir,
                             warnings, _depth + 1)

    return INPUT_RE.sub(replace, source)


# =============================================================================
# Paper parsing
# =============================================================================

def _split_sections(body: str) -> list[tuple[str, bool, str]]:
    """Split the document body into (title, is_appendix, raw_text) triples."""
    matches = list(SECTION_RE.finditer(body))
    appendix_at = None
    appendix_match = APPENDIX_RE.search(body)
    if appendix_match:
        appendix_at = appendix_match.start()

    sections: list[tuple[str, bool, str]] = []
    appendix_seen = False
    for i, match in enumerate(matches):
        try:
            title, title_end = read_braced(body, match.end() - 1)
        except ValueError:
            continue
        start = title_end
        end = matches[i + 1].start() if i + 1 < len(matches) else len(body)
        is_appendix = bool(appendix_at is not None and match.start() > appendix_at)
        if re.match(r"\s*appendix", title, re.IGNORECASE):
            is_appendix = True
        appendix_seen = appendix_seen or is_appendix
        sections.append((clean_text(title), appendix_seen, body[start:end]))
    return sections


def _extract_figures(raw: str, ordinal: int, counter: list[int],
                     warnings: list[str]) -> tuple[list[FigureUnit], str]:
    """Pull figure environments out of a section's raw text.

    Returns the figures plus the raw text with those environments removed so
    paragraph splitting never sees captions as body text.
    """
    figures: list[FigureUnit] = []
    remainder = []
    pos = 0
    while True:
        match = FIGURE_BEGIN_RE.search(raw, pos)
        if match is None:
            remainder.append(raw[pos:])
            break
        env_name = match.group(1)
        block = find_environment(raw, env_name, match.start())
        if block is None:
            warnings.append(f"unterminated {env_name} environment in section {ordinal}")
            remainder.append(raw[pos:match.start()])
            pos = match.end()
            continue
        begin, end, inner = block
        remainder.append(raw[pos:begin])
        pos = end

        caption = extract_command_arg(inner, "caption")
        if not caption or not clean_text(caption):
            warnings.append(f"figure without caption skipped in section {ordinal}")
            continue
        label_match = LABEL_RE.search(inner)
        if label_match:
            label = label_match.group(1).strip()
        else:
            counter[0] += 1
            label = f"fig:unlabeled-{counter[0]}"
            warnings.append(f"figure without label in section {ordinal}; assigned {label}")
        graphics = GRAPHICS_RE.search(inner)
        image_path = graphics.group(1).strip() if graphics else ""
        if not image_path:
            warnings.append(f"figure {label} has no graphics path")
        figures.append(FigureUnit(label=label, caption=clean_text(caption),
                                  image_path=image_path, declared_in_section=ordinal))
    return figures, "".join(remainder)


def _strip_non_figure_envs(raw: str, warnings: list[str]) -> str:
    """Drop table/equation-style float environments from body text."""
    for env in ("table", "table*", "algorithm", "equation", "equation*",
                "align", "align*", "tabular", "verbatim", "lstlisting"):
        while True:
            block = find_environment(raw, env)
            if block is None:
                break
            begin, end, _ = block
            raw = raw[:begin] + "\n\n" + raw[end:]
    return raw


def _paragraphs_with_refs(raw: str) -> list[tuple[str, list[str]]]:
    out = []
    for chunk in re.split(r"\n\s*\n", raw):
        refs = [label.strip() for m in REF_RE.finditer(chunk)
                for label in m.group(1).split(",")]
        text = clean_text(chunk)
        if text:
            out.append((text, refs))
    return out


def parse_paper(source_dir: Path, paper_id: str | None = None) -> PaperRecord:
    """Parse one paper's LaTeX source directory into a PaperRecord.

    Multi-file sources are resolved via input expansion. Unparseable pieces
    are skipped with a warning entry; only a missing document or abstract is
    fatal.
    """
    source_dir = Path(source_dir)
    if not source_dir.is_dir():
        raise UnreadableSource(f"{source_dir} is not a directory")
    warnings: list[str] = []
    main = _find_main_file(source_dir)
    source = expand_inputs(strip_comments(_read(main)), source_dir, warnings)

    title_raw = extract_command_arg(source, "title")
    title = clean_text(title_raw) if title_raw else ""
    if not title:
        warnings.append("no title found; using directory name")
        title = source_dir.name

    abstract_block = find_environment(source, "abstract")
    if abstract_block is None:
        raise MissingAbstract(f"{source_dir}: no abstract environment")
    abstract = clean_text(abstract_block[2])
    if not abstract:
        raise MissingAbstract(f"{source_dir}: abstract is empty")

    doc = BEGIN_DOC_RE.search(source)
    body = source[doc.end():] if doc else source
    end_doc = END_DOC_RE.search(body)
    if end_doc:
        body = body[:end_doc.start()]

    sections: list[SectionNode] = []
    figures: list[FigureUnit] = []
    unlabeled_counter = [0]

    raw_sections = _split_sections(body)
    if not raw_sections:
        warnings.append("no sections found")
    for ordinal, (sec_title, is_appendix, raw) in enumerate(raw_sections):
        sec_figures, remainder = _extract_figures(raw, ordinal, unlabeled_counter,
                                                  warnings)
        figures.extend(sec_figures)
        remainder = _strip_non_figure_envs(remainder, warnings)
        paragraphs = _paragraphs_with_refs(remainder)
        sections.append(SectionNode(
            title=sec_title, ordinal=ordinal, is_appendix=is_appendix,
            paragraphs=[text for text, _ in paragraphs],
            paragraph_refs=[[] for _ in paragraphs],
        ))
        sections[-1]._pending_refs = [refs for _, refs in paragraphs]  # type: ignore[attr-defined]

    # Resolve references now that all figure labels are known: refs to a
    # declared figure count; fig-prefixed refs with no target are dangling;
    # anything else (sections, tables, equations) is ignored.
    figure_labels = {f.label for f in figures}
    dangling: list[str] = []
    for section in sections:
        pending = section._pending_refs  # type: ignore[attr-defined]
        del section._pending_refs  # type: ignore[attr-defined]
        resolved: list[list[str]] = []
        for refs in pending:
            row = []
            for label in refs:
                if label in figure_labels:
                    row.append(label)
                elif label.lower().startswith("fig"):
                    if label not in dangling:
                        dangling.append(label)
            resolved.append(row)
        section.paragraph_refs = resolved
    if dangling:
        warnings.append(f"dangling figure references: {', '.join(dangling)}")

    for fig in figures:
        fig.reference_count = sum(
            1 for section in sections if fig.label in section.figure_refs)

    pid = paper_id or _slugify(source_dir.name)
    domain = _read_domain(source_dir, warnings)
    record = PaperRecord(paper_id=pid, title=title, abstract=abstract,
                         sections=sections, figures=figures, domain_tag=domain,
                         dangling_refs=dangling, warnings=warnings)
    for message in warnings:
        logger.warning("%s: %s", pid, message)
    return record


def _slugify(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    return slug or "paper"


def _read_domain(source_dir: Path, warnings: list[str]) -> str:
    meta = source_dir / "meta.json"
    if not meta.exists():
        return "other"
    try:
        domain = json.loads(meta.read_text(encoding="utf-8")).get("domain", "other")
    except (OSError, json.JSONDecodeError):
        warnings.append("unreadable meta.json; domain defaults to other")
        return "other"
    if domain not in DOMAIN_TAGS:
        warnings.append(f"unknown domain tag {domain!r}; using other")
        return "other"
    return domain


# =============================================================================
# Eligibility and anchor text
# =============================================================================

def mark_eligibility(paper: PaperRecord,
                     section_lexicon: tuple[str, ...] = DEFAULT_RESULTS_LEXICON,
                     ) -> PaperRecord:
    """Mark figures declared in the first results-onward section or later.

    Eligibility keys on the declaration position, never on where the figure is
    referenced; appendix figures are always ineligible. Idempotent.
    """
    if not section_lexicon:
        raise ValueError("section_lexicon must be non-empty")
    lexicon = tuple(w.lower() for w in section_lexicon)
    first_match = None
    for section in paper.sections:
        if section.is_appendix:
            continue
        title = section.title.lower()
        if any(word in title for word in lexicon):
            first_match = section.ordinal
            break
    if first_match is None:
        for fig in paper.figures:
            fig.eligible = False
        note = "no results-onward section matched; zero eligible figures"
        if note not in paper.warnings:
            paper.warnings.append(note)
            logger.warning("%s: %s", paper.paper_id, note)
        return paper

    appendix_ordinals = {s.ordinal for s in paper.sections if s.is_appendix}
    for fig in paper.figures:
        fig.eligible = (fig.declared_in_section >= first_match
                        and fig.declared_in_section not in appendix_ordinals)
    return paper


def anchor_paragraph_units(paper: PaperRecord, figure_label: str,
                           window: int = 1) -> list[AnchorParagraph]:
    """Anchor paragraphs P_F with their source identity.

    Every paragraph that references the figure, widened by +/- window
    paragraphs within its section, in document order, deduplicated.
    """
    if window < 0:
        raise ValueError("window must be >= 0")
    paper.figure(figure_label)  # raises UnknownFigure
    picked: dict[tuple[int, int], str] = {}
    for section in paper.sections:
        for idx, refs in enumerate(section.paragraph_refs):
            if figure_label not in refs:
                continue
            lo = max(0, idx - window)
            hi = min(len(section.paragraphs) - 1, idx + window)
            for p in range(lo, hi + 1):
                picked[(section.ordinal, p)] = section.paragraphs[p]
    return [AnchorParagraph(section=s, paragraph=p, text=text)
            for (s, p), text in sorted(picked.items())]


def anchor_paragraphs(paper: PaperRecord, figure_label: str,
                      window: int = 1) -> list[str]:
    return [unit.text for unit in anchor_paragraph_units(paper, figure_label, window)]


# =============================================================================
# Corpus-level ingestion
# =============================================================================

class AssetManifest:
    """Maps repo-relative image paths to content hashes (sha256).

    Keeps records small and diffable: JSONL rows carry the hash, this manifest
    is the one place that knows where the bytes live.
    """

    MISSING = "missing"

    def __init__(self, source_root: Path | None = None,
                 assets_dir: Path | None = None):
        self.source_root = Path(source_root) if source_root else None
        self.assets_dir = Path(assets_dir) if assets_dir else None
        self.by_path: dict[str, str] = {}
        self._path_by_hash: dict[str, str] = {}
        self._abs_by_hash: dict[str, Path] = {}

    def add(self, rel_path: str, file_path: Path | None) -> str:
        if file_path is not None and file_path.exists():
            digest = sha256_file(file_path)
            self._abs_by_hash.setdefault(digest, file_path.resolve())
        else:
            digest = self.MISSING
        self.by_path[rel_path] = digest
        if digest != self.MISSING:
            self._path_by_hash.setdefault(digest, rel_path)
        return digest

    def hash_for(self, rel_path: str) -> str | None:
        return self.by_path.get(rel_path)

    def bytes_for(self, digest: str) -> bytes | None:
        if self.assets_dir is not None:
            stored = self.assets_dir / digest
            if stored.exists():
                return stored.read_bytes()
        abs_path = self._abs_by_hash.get(digest)
        if abs_path is not None and abs_path.exists():
            return abs_path.read_bytes()
        rel = self._path_by_hash.get(digest)
        if rel is None or self.source_root is None:
            return None
        path = self.source_root / rel
        return path.read_bytes() if path.exists() else None

    def copy_assets(self, assets_dir: Path) -> None:
        """Materialize a content-addressed copy so the corpus is self-contained."""
        assets_dir = Path(assets_dir)
        assets_dir.mkdir(parents=True, exist_ok=True)
        for digest in self._path_by_hash:
            target = assets_dir / digest
            if target.exists():
                continue
            data = self.bytes_for(digest)
            if data is not None:
                target.write_bytes(data)
        self.assets_dir = assets_dir

    def save(self, path: Path) -> None:
        lines = [f"{digest}  {rel}" for rel, digest in sorted(self.by_path.items())]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""),
                              encoding="utf-8")

    @classmethod
    def load(cls, path: Path, source_root: Path | None = None,
             assets_dir: Path | None = None) -> "AssetManifest":
        path = Path(path)
        if assets_dir is None:
            default_dir = path.parent / "assets"
            if default_dir.is_dir():
                assets_dir = default_dir
        manifest = cls(source_root, assets_dir)
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            digest, rel = line.split(None, 1)
            manifest.by_path[rel] = digest
            if digest != cls.MISSING:
                manifest._path_by_hash.setdefault(digest, rel)
        return manifest


def ingest_corpus(source_root: Path, out_dir: Path,
                  section_lexicon: tuple[str, ...] = DEFAULT_RESULTS_LEXICON,
                  copy_assets: bool = True,
                  ) -> tuple[list[PaperRecord], AssetManifest]:
    """Parse every paper subdirectory under source_root.

    Writes `papers.jsonl` (sorted by paper_id) and `assets.manifest` under
    out_dir. Parsing is pure per paper; order of work never changes output.
    """
    source_root = Path(source_root)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    papers: list[PaperRecord] = []
    manifest = AssetManifest(source_root)
    for paper_dir in sorted(p for p in source_root.iterdir() if p.is_dir()):
        record = parse_paper(paper_dir)
        mark_eligibility(record, section_lexicon)
        papers.append(record)
        if record.paper_id != paper_dir.name:
            logger.warning("paper dir %s slugged to %s; keep dir names slug-friendly "
                           "so asset paths resolve after reload", paper_dir.name,
                           record.paper_id)
        for fig in record.figures:
            if not fig.image_path:
                continue
            rel = f"{record.paper_id}/{fig.image_path}"
            manifest.add(rel, paper_dir / fig.image_path)
    papers.sort(key=lambda p: p.paper_id)
    seen_ids = [p.paper_id for p in papers]
    if len(set(seen_ids)) != len(seen_ids):
        raise UnreadableSource(f"duplicate paper ids after slugging: {seen_ids}")

    with open(out_dir / "papers.jsonl", "w", encoding="utf-8") as f:
        for record in papers:
            f.write(json.dumps(record.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
    manifest.save(out_dir / "assets.manifest")
    if copy_assets:
        manifest.copy_assets(out_dir / "assets")
    return papers, manifest


def load_papers(path: Path) -> list[PaperRecord]:
    papers = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                papers.append(PaperRecord.from_json(json.loads(line)))
    return papers


def image_rel_path(paper: PaperRecord, figure: FigureUnit) -> str | None:
    return f"{paper.paper_id}/{figure.image_path}" if figure.image_path else None
