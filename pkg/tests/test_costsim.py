from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import load_data
from chainabac import costsim
from chainabac.costsim import CostParams, InsufficientSamples, ScenarioCase, financial_cost, run_scenario
from chainabac.ledger import TraceEntry

PROPOSED = CostParams(2296088)


def test_case1_proposed():
    gas, etc, aud = financial_cost(300, PROPOSED)
    assert gas == 688_826_400
    assert etc == Decimal("0.6888264")
    assert aud == Decimal("52.770990504")


def test_zero_transactions():
    assert financial_cost(0, PROPOSED) == (0, 0, 0)
    report = run_scenario(ScenarioCase(0, 0, 0), PROPOSED)
    assert (report.n_tx, report.total_gas, report.cost_currency, report.cost_fiat) == (0, 0, 0, 0)


def test_zhang_case2():
    gas, etc, aud = financial_cost(1125, CostParams(1910838))
    assert gas == 2_149_692_750
    assert abs(etc - Decimal("2.14969")) <= Decimal("5e-5")
    assert abs(aud - Decimal("164.687962")) <= Decimal("5e-4")


def test_tx_per_device_reproduces_counts():
    for number, n_tx in ((1, 300), (2, 1125), (3, 3000)):
        case = costsim.default_case(number)
        assert case.tx_per_device * case.total == n_tx


def test_invalid_inputs():
    with pytest.raises(ValueError):
        CostParams(0)
    with pytest.raises(ValueError):
        CostParams(1, Decimal("-1"))
    with pytest.raises(ValueError):
        ScenarioCase(1, 2, 4)
    with pytest.raises(ValueError):
        financial_cost(-1, PROPOSED)


@given(a=st.integers(0, 10**6), b=st.integers(0, 10**6), gas=st.integers(1, 10**7))
def test_linearity(a, b, gas):
    p = CostParams(gas, Decimal("1e-9"), Decimal("76.61"))
    ab = financial_cost(a + b, p)
    sa, sb = financial_cost(a, p), financial_cost(b, p)
    assert ab == tuple(x + y for x, y in zip(sa, sb))


@given(gas=st.integers(1, 10**7), n=st.integers(0, 10**5))
def test_report_invariants(gas, n):
    p = CostParams(gas)
    total, cur, fiat = financial_cost(n, p)
    assert total == n * gas
    assert cur == Decimal(total) * p.gas_to_currency
    assert fiat == cur * p.currency_to_fiat


def test_reference_rows_total_gas_exact():
    ref = load_data("cost_reference.json")
    rows = costsim.table_rows()
    for got, want in zip(rows, ref["rows"]):
        assert (got["scheme"], got["case"], got["n_tx"], got["total_gas"]) == (want[0], want[1], want[5], want[7])


def test_report_bytes_stable():
    a = costsim.emit_report(costsim.table_rows(), "csv")
    b = costsim.emit_report(costsim.table_rows(), "csv")
    assert a == b
    assert a.splitlines()[0] == b"scheme,case,miners,devices,total,n_tx,gas_per_tx,total_gas,cost_currency,cost_fiat,measured_gas"
    assert costsim.emit_report(costsim.table_rows(), "json").startswith(b"[")
    with pytest.raises(ValueError):
        costsim.emit_report([], "xml")


def test_measured_gas_reported_alongside(tmp_path):
    report = run_scenario(ScenarioCase.of(1, 1, 5), PROPOSED, measure=True)
    assert report.n_tx == 10
    assert report.measured_gas and report.measured_gas > 0
    assert report.total_gas == 10 * PROPOSED.gas_per_tx


def test_params_file(tmp_path):
    path = tmp_path / "p.toml"
    path.write_text('gas_per_tx = 1000\ngas_to_currency = "2e-9"\ncurrency_to_fiat = "10"\ntx_per_device = 3\n')
    params, tpd = costsim.load_params(path)
    assert params == CostParams(1000, Decimal("2e-9"), Decimal("10")) and tpd == 3


def test_ordering_needs_samples():
    with pytest.raises(InsufficientSamples):
        costsim.gas_ordering_report([TraceEntry(1, "deploy", "AccessManagement", "Accepted", 5)])


def test_ordering_ignores_rejected(system):
    from chainabac.scenarios import run_operation_mix
    run_operation_mix(system, rounds=1)
    trace = system.ledger.trace()
    fake = [TraceEntry(99, "SubjectAttributes", "update", "Rejected", 10**9)]
    assert costsim.gas_ordering_report(trace + fake) == costsim.gas_ordering_report(trace)
