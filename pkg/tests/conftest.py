import json

import pytest

from deepcorpus import _scan_py
from deepcorpus.kb import EntityRecord, from_records
from deepcorpus.synth import WorldSpec, gen_world

try:
    from deepcorpus import _scan as _scan_c
except ImportError:  # extension not built
    _scan_c = None

BACKENDS = [pytest.param(_scan_py, id="python")]
if _scan_c is not None:
    BACKENDS.append(pytest.param(_scan_c, id="cython"))

# three Russian locative city names linked to their English labels
CITIES_RU = "Магазины нового формата заработали в Краснодаре , Саратове и Ульяновске .".split()
CITY_RECORDS = [
    {"id": "Q1", "surfaces": {"en": ["Krasnodar"], "ru": ["Краснодар", "Краснодаре"]}},
    {"id": "Q2", "surfaces": {"en": ["Saratov"], "ru": ["Саратов", "Саратове"]}},
    {"id": "Q3", "surfaces": {"en": ["Ulyanovsk"], "ru": ["Ульяновск", "Ульяновске"]}},
]


@pytest.fixture(params=BACKENDS, scope="session")
def backend(request):
    return request.param


@pytest.fixture
def city_kb_path(tmp_path):
    p = tmp_path / "kb.jsonl"
    p.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in CITY_RECORDS), encoding="utf-8")
    return p


@pytest.fixture
def city_kb():
    return from_records(
        [EntityRecord(r["id"], {k: tuple(v) for k, v in r["surfaces"].items()}) for r in CITY_RECORDS],
        {"en", "ru"},
    )


@pytest.fixture(scope="session")
def world():
    return gen_world(WorldSpec(seed=11))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
