"""Seeded FormWorld generator: page trees, elements and solvable tasks."""

from __future__ import annotations

import numpy as np

from ..actions import EnvKind
from ..types import GoalAtom, Task
from .model import Element, EnvState, FormWorld, Page
from .oracle import shortest_path_length

PAGE_NAMES = (
    "Settings", "Profile", "Notes", "Contacts", "Calendar", "Messages", "Photos", "Music",
    "Weather", "Account", "Privacy", "Display", "Sound", "Network", "Storage", "Orders",
    "Library", "Travel", "Billing", "Reminders",
)
INPUT_LABELS = (
    "Username", "Email", "Phone number", "City", "Nickname", "Title", "Comment",
    "Password hint", "Street", "Company", "Website", "Zip code", "Full name", "Birthday",
)
CHECKBOX_LABELS = (
    "Dark mode", "Enable alerts", "Auto backup", "Remember me", "Location access",
    "Sync address book", "Hide activity", "Show previews", "Two factor login", "Vibrate on ring",
    "Weekly digest", "Offline maps",
)
SELECT_LABELS = {
    "Font size": ("Small", "Medium", "Large"),
    "Language": ("English", "French", "German", "Spanish"),
    "Theme color": ("Red", "Green", "Blue"),
    "Time zone": ("UTC", "CET", "PST"),
    "Currency": ("USD", "EUR", "JPY"),
    "Sort order": ("Newest", "Oldest", "Popular"),
}
BUTTON_LABELS = ("Help", "About", "Feedback", "Refresh")
LABEL_TEXTS = (
    "Welcome back", "Last updated today", "Version 2.1", "No new items",
    "Tip: swipe to refresh", "All changes saved",
)
INPUT_VALUES = (
    "alice", "bob42", "paris", "blue sky", "2024-05-01", "Main St 5", "team-red", "qwerty",
    "Nova", "oslo", "42", "hello world",
)

DIFFICULTY = {
    # pages (lo, hi), max elements per page, atoms per goal, step slack
    "easy": ((2, 3), 8, 1, 2),
    "medium": ((4, 6), 15, 2, 3),
}


def _pick(rng: np.random.Generator, pool, used: set):
    choices = [x for x in pool if x not in used]
    x = choices[int(rng.integers(len(choices)))]
    used.add(x)
    return x


def _left(pool, used: set) -> bool:
    return any(x not in used for x in pool)


def _build_world(seed: int, env_kind: EnvKind, difficulty: str, world_id: str) -> FormWorld:
    (lo, hi), max_el, _, _ = DIFFICULTY[difficulty]
    rng = np.random.default_rng([seed, 0 if env_kind is EnvKind.MOBILE else 1, lo])
    n_pages = int(rng.integers(lo, hi + 1))
    used: set = set()
    names = ["Home"] + [_pick(rng, PAGE_NAMES, used) for _ in range(n_pages - 1)]

    # Tree: first-level children of the root, deeper pages hang off a random earlier page.
    parent = {0: None}
    first_level = n_pages - 1 if difficulty == "easy" else max(2, (n_pages - 1) // 2 + 1)
    for p in range(1, n_pages):
        parent[p] = 0 if p <= first_level else int(rng.integers(1, p))
    children = {p: [c for c in range(1, n_pages) if parent[c] == p] for p in range(n_pages)}

    pages = []
    for p in range(n_pages):
        specs: list[tuple] = [("link", names[c], c, ()) for c in children[p]]
        budget = max_el - len(specs)
        n_forms = 2 if difficulty == "easy" else int(rng.integers(3, 6))
        if p == 0:
            n_forms = 1 if difficulty == "easy" else 2
        for _ in range(min(n_forms, budget - 2)):
            r = rng.random()
            has_select = env_kind is EnvKind.WEB and _left(SELECT_LABELS, used)
            has_input, has_checkbox = _left(INPUT_LABELS, used), _left(CHECKBOX_LABELS, used)
            # fall through to a kind whose label pool is not yet used up
            if has_select and (r < 0.3 or not (has_input or has_checkbox)):
                label = _pick(rng, SELECT_LABELS, used)
                specs.append(("select", label, None, SELECT_LABELS[label]))
            elif has_input and (r < 0.65 or not has_checkbox):
                specs.append(("input", _pick(rng, INPUT_LABELS, used), None, ()))
            elif has_checkbox:
                specs.append(("checkbox", _pick(rng, CHECKBOX_LABELS, used), None, ()))
        specs.append(("label", LABEL_TEXTS[int(rng.integers(len(LABEL_TEXTS)))], None, ()))
        if rng.random() < 0.5 and len(specs) < max_el:
            others = [q for q in range(n_pages) if q != p]
            specs.append(("button", BUTTON_LABELS[int(rng.integers(len(BUTTON_LABELS)))],
                          others[int(rng.integers(len(others)))], ()))
        perm = rng.permutation(len(specs))
        elements = tuple(Element(k, *specs[int(src)]) for k, src in enumerate(perm))
        pages.append(Page(p, names[p], elements))
    return FormWorld(world_id, env_kind, tuple(pages), difficulty, seed)


def _breadcrumb(world: FormWorld, page: int) -> str:
    path = world.path_to(page)
    if len(path) == 1:
        return "Home"
    return " > ".join(world.pages[q].name for q in path[1:])


def _clause(world: FormWorld, atom: GoalAtom) -> str:
    where = _breadcrumb(world, atom.page)
    prefix = "On Home" if where == "Home" else f"In {where}"
    if atom.kind == "on_page":
        return f"Go to {where}."
    label = world.element(atom.page, atom.element).label
    if atom.kind == "value_equals":
        return f"{prefix}, enter '{atom.text}' in {label}."
    if atom.kind == "checked":
        return f"{prefix}, check {label}."
    if atom.kind == "selected":
        return f"{prefix}, select '{atom.text}' for {label}."
    raise ValueError(atom.kind)


ATOM_ORDER = ("on_page", "value_equals", "checked", "selected")


def _candidate_atoms(world: FormWorld, rng: np.random.Generator) -> list[GoalAtom]:
    atoms = []
    for page in world.pages:
        if page.id != 0:
            atoms.append(GoalAtom("on_page", page.id))
        for el in page.elements:
            if el.kind == "input":
                atoms.append(GoalAtom("value_equals", page.id, el.index,
                                      INPUT_VALUES[int(rng.integers(len(INPUT_VALUES)))]))
            elif el.kind == "checkbox":
                atoms.append(GoalAtom("checked", page.id, el.index))
            elif el.kind == "select":
                # never the first option so the goal differs from an arbitrary default pick
                atoms.append(GoalAtom("selected", page.id, el.index,
                                      el.options[1 + int(rng.integers(len(el.options) - 1))]))
    return atoms


def generate_env(seed: int, env_kind: EnvKind | str = EnvKind.MOBILE, difficulty: str = "easy",
                 n_tasks: int = 4, world_id: str | None = None) -> tuple[EnvState, list[Task]]:
    """Build one environment and ``n_tasks`` distinct solvable tasks for it.

    Returns the initial state (which carries the world) and the tasks. Every
    task's ``max_steps`` is its shortest solution length plus a small slack.
    """
    env_kind = EnvKind(env_kind)
    if difficulty not in DIFFICULTY:
        raise ValueError(f"unknown difficulty {difficulty!r}")
    world_id = world_id or f"{env_kind.value}-{difficulty}-{seed}"
    world = _build_world(seed, env_kind, difficulty, world_id)
    _, _, n_atoms, slack = DIFFICULTY[difficulty]
    rng = np.random.default_rng([seed, 7, n_atoms])
    pool = _candidate_atoms(world, rng)
    element_atoms = [a for a in pool if a.kind != "on_page"]
    kinds = [k for k in ATOM_ORDER if any(a.kind == k for a in pool)]
    offset = int(rng.integers(len(kinds)))

    tasks: list[Task] = []
    seen_goals = set()
    s0 = world.initial_state()
    attempts = 0
    while len(tasks) < n_tasks and attempts < 50 * n_tasks:
        attempts += 1
        if n_atoms == 1:
            # rotate through goal kinds so every kind present in the world gets tasks
            kind = kinds[(offset + len(tasks)) % len(kinds)]
            of_kind = [a for a in pool if a.kind == kind and (a.kind, a.page, a.element) not in seen_goals]
            choices = of_kind or pool
            goal = (choices[int(rng.integers(len(choices)))],)
        else:
            if len(element_atoms) < 2:
                break
            idx = rng.choice(len(element_atoms), size=2, replace=False)
            goal = tuple(element_atoms[int(k)] for k in sorted(idx))
        key = tuple((a.kind, a.page, a.element) for a in goal)
        if key in seen_goals:
            # every distinct goal used; reuse is allowed only once the pool is exhausted
            if len(seen_goals) < _n_distinct(pool, element_atoms, n_atoms):
                continue
        seen_goals.add(key)
        query = " ".join(_clause(world, a) for a in goal)
        probe = Task(f"{world_id}/t{len(tasks)}", query, env_kind, goal, 1, world_id)
        length = shortest_path_length(s0, probe)
        tasks.append(Task(probe.id, query, env_kind, goal, length + slack, world_id))
    return s0, tasks


def _n_distinct(pool, element_atoms, n_atoms: int) -> int:
    if n_atoms == 1:
        return len(pool)
    k = len(element_atoms)
    return k * (k - 1) // 2


def generate_suite(seed: int, env_kind: EnvKind | str = EnvKind.MOBILE, difficulty: str = "easy",
                   n_tasks: int = 20, tasks_per_env: int = 4) -> list[tuple[FormWorld, list[Task]]]:
    """Several environments whose tasks add up to ``n_tasks``."""
    env_kind = EnvKind(env_kind)
    suite = []
    remaining = n_tasks
    k = 0
    while remaining > 0:
        want = min(tasks_per_env, remaining)
        s0, tasks = generate_env(seed * 1000 + k, env_kind, difficulty, want)
        suite.append((s0.world, tasks))
        remaining -= len(tasks)
        k += 1
    return suite
