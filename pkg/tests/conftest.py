import functools

import pytest

import tempogr
from tempogr import decoding, evaluation
from tempogr.corpus import ItemRecord
from tempogr.synthetic import SyntheticConfig, generate


class DecodeAudit:
    """Counts every identifier emitted by a decoding call and any that fall outside the trie."""

    def __init__(self):
        self.emitted = 0
        self.invalid = []

    def check(self, trie, ranked):
        for item, _ in ranked:
            self.emitted += 1
            ok = item in trie.item_index and trie.lookup(trie.path(item)) == item
            if not ok:
                self.invalid.append(item)


AUDIT = DecodeAudit()


def _audited(fn):
    @functools.wraps(fn)
    def wrapper(model, ctx, trie, *args, **kwargs):
        out = fn(model, ctx, trie, *args, **kwargs)
        AUDIT.check(trie, out)
        return out

    return wrapper


# wrap before test modules import the names
_ORIGINAL = {name: getattr(decoding, name) for name in ("beam_search", "full_rank")}
for _mod in (decoding, evaluation, tempogr):
    for _name, _fn in _ORIGINAL.items():
        setattr(_mod, _name, _audited(_fn))


@pytest.fixture
def decode_audit():
    return AUDIT


@pytest.fixture(scope="session")
def small_synthetic():
    return generate(SyntheticConfig(n_users=150, n_items=50, cluster_size=10, seed=3))


def record(item, text):
    return ItemRecord(item=item, title=text)


# acceptance bookkeeping: one line per criterion in the terminal summary

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "run_last: run after every other test")


def pytest_collection_modifyitems(session, config, items):
    items.sort(key=lambda item: item.get_closest_marker("run_last") is not None)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
