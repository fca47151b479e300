"""Shared fixtures: synthetic corpora used across test modules.

The five-archetype corpus is built once per test session; its archetypes
occupy separated boxes in (a, r) with distinct periodicity-variation bands,
so partition recovery is unambiguous.
"""

from __future__ import annotations

from datetime import date

import pytest

from volprof.synth import ArchetypeSpec, CorpusSpec, Uniform, generate_corpus

WINDOW_START = date(2011, 1, 1)
WINDOW_END = date(2011, 4, 30)


def make_archetype(
    name: str,
    count: int,
    join_hi: int,
    a_range: tuple[float, float],
    r_range: tuple[float, float],
    irregularity: float,
    sessions: tuple[float, float] = (1, 2),
    length_minutes: tuple[float, float] = (10, 25),
    intra_seconds: tuple[float, float] = (20, 90),
) -> ArchetypeSpec:
    return ArchetypeSpec(
        name=name,
        count=count,
        join_day_range=(0, join_hi),
        target_a=Uniform(*a_range),
        target_r=Uniform(*r_range),
        sessions_per_active_day=Uniform(*sessions),
        session_length_minutes=Uniform(*length_minutes),
        intra_gap_seconds=Uniform(*intra_seconds),
        gap_irregularity=irregularity,
    )


def make_corpus_spec(count_each: int = 200, seed: int = 20260819) -> CorpusSpec:
    return CorpusSpec(
        window_start=WINDOW_START,
        window_end=WINDOW_END,
        seed=seed,
        archetypes=(
            make_archetype(
                "hardworking", count_each, 10, (0.80, 0.95), (0.10, 0.22), 0.0,
                sessions=(1, 2), length_minutes=(8, 20),
            ),
            make_archetype(
                "spasmodic", count_each, 20, (0.45, 0.60), (0.05, 0.12), 1.2,
                sessions=(1, 3), length_minutes=(15, 45), intra_seconds=(30, 120),
            ),
            make_archetype(
                "persistent", count_each, 8, (0.06, 0.14), (0.80, 0.95), 0.3,
                sessions=(1, 1),
            ),
            make_archetype(
                "lasting", count_each, 8, (0.12, 0.20), (0.40, 0.55), 1.5,
                length_minutes=(10, 30),
            ),
            make_archetype(
                "moderate", count_each, 15, (0.30, 0.42), (0.22, 0.32), 0.6,
                intra_seconds=(25, 100),
            ),
        ),
    )


@pytest.fixture(scope="session")
def planted_corpus():
    """1,000 volunteers, 200 per archetype, fixed seed."""
    return generate_corpus(make_corpus_spec())


@pytest.fixture(scope="session")
def planted_corpus_files(planted_corpus, tmp_path_factory):
    directory = tmp_path_factory.mktemp("corpus")
    log_path = directory / "corpus.csv"
    truth_path = directory / "truth.csv"
    log_path.write_text("\n".join(planted_corpus.log_lines()) + "\n")
    truth_path.write_text("\n".join(planted_corpus.truth_lines()) + "\n")
    return log_path, truth_path
