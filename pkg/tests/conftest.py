import csv

import pytest

from swellcp.data import CONTINUOUS

HEADER = list(CONTINUOUS) + ["irradiation_type", "void_swelling"]

ACCEPTANCE = {}


def base_row(**overrides):
    row = {name: 0.0 for name in CONTINUOUS}
    row.update(dose=10.0, temperature=500.0, gas=0.0, Cr=16.0, Fe=65.0, Ni=15.0)
    row.update(irradiation_type="Neutron", void_swelling=1.0)
    row.update(overrides)
    return row


def write_rows(path, rows, header=None, extra_cols=()):
    header = list(header or HEADER) + list(extra_cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([r.get(h, "x") for h in header])
    return path


@pytest.fixture
def csv_writer(tmp_path):
    def make(rows, name="data.csv", **kw):
        return write_rows(tmp_path / name, rows, **kw)

    return make


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {detail}")
