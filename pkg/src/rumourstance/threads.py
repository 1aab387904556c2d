"""Tree-shaped discussion threads: parsing, validation and linearization.

A thread file is a JSON object::

    {"thread_id": "...", "platform": "twitter" | "reddit",
     "posts": [{"id": "...", "parent_id": null | "...", "text": "...",
                "label": null | "support" | "deny" | "query" | "comment",
                "media": false}, ...]}

Split manifests list ``path<TAB>split`` pairs, one per line; relative paths
resolve against the manifest's directory.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional


class ThreadError(ValueError):
    """Base class for ingestion failures."""


class MalformedDocument(ThreadError):
    pass


class BrokenTree(ThreadError):
    pass


class MissingLabel(ThreadError):
    pass


class StanceLabel(enum.IntEnum):
    SUPPORT = 0
    DENY = 1
    QUERY = 2
    COMMENT = 3

    @property
    def short(self) -> str:
        return "SDQC"[self.value]

    @property
    def lower(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "StanceLabel":
        if isinstance(value, (int, StanceLabel)) and not isinstance(value, bool):
            return cls(int(value))
        key = str(value).strip().lower()
        for lab in cls:
            if key in (lab.lower, lab.short.lower()):
                return lab
        raise MalformedDocument(f"unknown stance label {value!r}")


PLATFORMS = ("twitter", "reddit")
SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class Post:
    id: str
    text: str
    parent_id: Optional[str]
    thread_id: str
    platform: str
    label: Optional[StanceLabel] = None
    media_flag: bool = False


@dataclass
class Thread:
    thread_id: str
    root_id: str
    posts: dict[str, Post]
    children: dict[str, list[str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.posts)

    @property
    def root(self) -> Post:
        return self.posts[self.root_id]

    def iter_depth_first(self) -> Iterable[Post]:
        stack = [self.root_id]
        while stack:
            pid = stack.pop()
            yield self.posts[pid]
            stack.extend(reversed(self.children.get(pid, [])))

    def ancestors(self, post_id: str) -> list[str]:
        out = []
        cur = self.posts[post_id].parent_id
        while cur is not None:
            out.append(cur)
            cur = self.posts[cur].parent_id
        return out


@dataclass(frozen=True)
class StanceTriple:
    source_text: str
    previous_text: str
    target_text: str
    target_id: str
    label: Optional[StanceLabel] = None


@dataclass(frozen=True)
class SplitStats:
    split: str
    counts: dict[StanceLabel, int]
    total: int


def _require(obj: dict, key: str, kind, where: str):
    if key not in obj:
        raise MalformedDocument(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise MalformedDocument(f"{where}: field {key!r} has wrong type")
    return val


def thread_from_dict(doc: dict) -> Thread:
    if not isinstance(doc, dict):
        raise MalformedDocument("thread document must be an object")
    thread_id = str(_require(doc, "thread_id", (str, int), "thread"))
    platform = _require(doc, "platform", str, "thread").lower()
    if platform not in PLATFORMS:
        raise MalformedDocument(f"unknown platform {platform!r}")
    raw_posts = _require(doc, "posts", list, "thread")
    if not raw_posts:
        raise MalformedDocument("thread has no posts")

    posts: dict[str, Post] = {}
    order: list[str] = []
    for i, rp in enumerate(raw_posts):
        where = f"post #{i}"
        if not isinstance(rp, dict):
            raise MalformedDocument(f"{where}: not an object")
        pid = str(_require(rp, "id", (str, int), where))
        if pid in posts:
            raise MalformedDocument(f"duplicate post id {pid!r}")
        parent = rp.get("parent_id")
        if parent is not None:
            parent = str(parent)
        text = rp.get("text")
        # deleted posts stay in place with empty text
        text = "" if text is None else text
        if not isinstance(text, str):
            raise MalformedDocument(f"{where}: text must be a string")
        label = rp.get("label")
        label = None if label is None else StanceLabel.parse(label)
        media = rp.get("media", False)
        if not isinstance(media, bool):
            raise MalformedDocument(f"{where}: media must be a boolean")
        posts[pid] = Post(pid, text, parent, thread_id, platform, label, media)
        order.append(pid)

    roots = [pid for pid in order if posts[pid].parent_id is None]
    if len(roots) != 1:
        raise BrokenTree(f"thread {thread_id}: expected one root, found {len(roots)}")
    children: dict[str, list[str]] = {}
    for pid in order:
        parent = posts[pid].parent_id
        if parent is None:
            continue
        if parent not in posts:
            raise BrokenTree(f"post {pid!r} has unresolvable parent {parent!r}")
        children.setdefault(parent, []).append(pid)

    thread = Thread(thread_id, roots[0], posts, children)
    seen = {p.id for p in thread.iter_depth_first()}
    if len(seen) != len(posts):
        raise BrokenTree(f"thread {thread_id}: cycle or unreachable posts")
    return thread


def parse_thread(document: str | bytes) -> Thread:
    """Parse and validate one serialized thread."""
    try:
        doc = json.loads(document)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedDocument(str(exc)) from exc
    return thread_from_dict(doc)


def thread_to_dict(thread: Thread) -> dict:
    posts = []
    for p in thread.posts.values():
        posts.append({
            "id": p.id,
            "parent_id": p.parent_id,
            "text": p.text,
            "label": None if p.label is None else p.label.lower,
            "media": p.media_flag,
        })
    return {"thread_id": thread.thread_id, "platform": thread.root.platform, "posts": posts}


def serialize_thread(thread: Thread) -> str:
    return json.dumps(thread_to_dict(thread), ensure_ascii=False, indent=1)


def load_thread(path: str | Path) -> Thread:
    return parse_thread(Path(path).read_bytes())


def linearize(thread: Thread) -> list[StanceTriple]:
    """One (source, previous, target) triple per post, depth-first from the root.

    The previous text is left empty when the parent is the root, so the source
    never appears twice in the first document.
    """
    root = thread.root
    out = []
    for post in thread.iter_depth_first():
        if post.id == root.id:
            source, previous = "", ""
        else:
            source = root.text
            previous = "" if post.parent_id == root.id else thread.posts[post.parent_id].text
        out.append(StanceTriple(source, previous, post.text, post.id, post.label))
    return out


def read_manifest(path: str | Path) -> list[tuple[Path, str]]:
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise MalformedDocument(f"{path}:{lineno}: expected 'path<TAB>split'")
        file, split = parts[0].strip(), parts[1].strip()
        if split not in SPLITS:
            raise MalformedDocument(f"{path}:{lineno}: unknown split {split!r}")
        fp = Path(file)
        if not fp.is_absolute():
            fp = path.parent / fp
        entries.append((fp, split))
    return entries


def load_dataset(manifest: str | Path) -> list[tuple[Thread, str]]:
    return [(load_thread(p), split) for p, split in read_manifest(manifest)]


def split_stats(dataset: Iterable[tuple[Thread, str]]) -> list[SplitStats]:
    counts = {s: {lab: 0 for lab in StanceLabel} for s in SPLITS}
    for thread, split in dataset:
        if split not in counts:
            raise MalformedDocument(f"unknown split {split!r}")
        for post in thread.posts.values():
            if post.label is None:
                raise MissingLabel(f"post {post.id!r} in thread {thread.thread_id!r} has no label")
            counts[split][post.label] += 1
    return [SplitStats(s, counts[s], sum(counts[s].values())) for s in SPLITS]


def format_stats_table(stats: list[SplitStats]) -> str:
    header = f"{'':<8}{'S':>7}{'D':>7}{'Q':>7}{'C':>7}{'Total':>8}"
    lines = [header]
    for st in stats:
        c = st.counts
        lines.append(
            f"{st.split:<8}{c[StanceLabel.SUPPORT]:>7}{c[StanceLabel.DENY]:>7}"
            f"{c[StanceLabel.QUERY]:>7}{c[StanceLabel.COMMENT]:>7}{st.total:>8}"
        )
        if st.total:
            pct = [round(100 * c[lab] / st.total) for lab in StanceLabel]
            lines.append(f"{'in %':<8}" + "".join(f"{p:>7}" for p in pct))
    return "\n".join(lines)
