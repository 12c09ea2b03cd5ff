"""Shared fixtures: taxonomy, toy training corpus, bundled data paths."""
from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from factorcode import annotator as A
from factorcode.taxonomy import load_default_taxonomy

# Four concepts with deliberately separable vocabulary; five sentences each.
TOY_TOPICS: dict[str, list[str]] = {
    "3.3": [
        "the midwifery team worked closely together during the shift",
        "joint working between obstetric and neonatal teams was effective",
        "team members coordinated the transfer between the units",
        "multidisciplinary team meetings reviewed the escalation plan",
        "the team debrief highlighted good cooperation across wards",
    ],
    "3.5": [
        "the notes were not documented in the maternal record",
        "documentation of the telephone triage call was incomplete",
        "the record did not contain the fetal heart rate readings",
        "clinical documentation lacked timestamps for key events",
        "paper records were transcribed into the electronic system late",
    ],
    "1.4": [
        "visiting restrictions during the pandemic limited support",
        "the covid outbreak delayed the face to face appointment",
        "pandemic guidance required remote consultations instead",
        "staff absence due to covid infection reduced capacity",
        "the mother attended alone because of covid rules",
    ],
    "4.5": [
        "a venous thromboembolism risk assessment was not completed",
        "the risk assessment at booking missed the raised bmi",
        "no updated risk scoring followed the new symptoms",
        "the admission risk assessment was left unsigned",
        "risk evaluation for preeclampsia was not repeated",
    ],
}


def toy_training_examples() -> list[A.TrainingExample]:
    examples = []
    i = 0
    for code in sorted(TOY_TOPICS):
        for text in TOY_TOPICS[code]:
            examples.append(A.TrainingExample("toy", i, text, frozenset({code})))
            i += 1
    return examples


@pytest.fixture(scope="session")
def taxonomy():
    return load_default_taxonomy()


@pytest.fixture(scope="session")
def toy_examples():
    return toy_training_examples()


@pytest.fixture(scope="session")
def toy_model(toy_examples, taxonomy):
    return A.train(toy_examples, taxonomy, batch_id="toy")


def fixture_dir(name: str) -> Path:
    return Path(str(resources.files("factorcode").joinpath(f"data/fixtures/{name}")))


@pytest.fixture(scope="session")
def demo_corpus_dir() -> Path:
    return fixture_dir("demo_corpus")


@pytest.fixture(scope="session")
def irr_fixture_dir() -> Path:
    return fixture_dir("irr_s14")
