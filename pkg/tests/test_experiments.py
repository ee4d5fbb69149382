import dataclasses
import math

import numpy as np
import pytest

from basiscycle.circuit import TimedCircuit, circuit_unitary, leakage
from basiscycle.core import distance_up_to_global_phase
from basiscycle.experiments import (CCZ_MATRIX, REGISTER_LABELS, SITE_C1, SITE_C2, SITE_T, TOFFOLI_MATRIX,
                                    ConfigError, ErrorAnalysisConfig, ExperimentRecord, NoiseConfig,
                                    StabilityConfig, WalkConfig, build_ccz, build_identity_probes,
                                    build_qubit_toffoli_reference, build_toffoli, build_unprotected_ccz,
                                    calibrate_decoherence, calibrate_static_phases, config_hash, index_of_label,
                                    label_of_index, noisy_channel, qubit_unitary, ramsey_pairs,
                                    ramsey_probabilities, records_to_csv, run_error_analysis,
                                    run_stability_experiment, xplus_spacings)
from basiscycle.noise import NoiseModel
from basiscycle.tomography import Superoperator, process_fidelity, ramsey_phase_fit, truth_table

SWEEP = np.linspace(-0.3, 0.3, 13)


@pytest.fixture(scope="module")
def ccz():
    return build_ccz()


def test_labels_follow_target_first_order():
    # site order is (c2, c1, t); labels read (t, c2, c1)
    assert label_of_index(0b001) == "100"
    assert label_of_index(0b100) == "010"
    assert all(index_of_label(label_of_index(i)) == i for i in range(8))
    assert sorted(REGISTER_LABELS) == [format(i, "03b") for i in range(8)]
    with pytest.raises(ValueError):
        index_of_label("12")


def test_ccz_ideal(ccz):
    assert distance_up_to_global_phase(qubit_unitary(ccz), CCZ_MATRIX) < 1e-9
    assert leakage(circuit_unitary(ccz), ccz.dims) < 1e-12


def test_ccz_protected_under_detuning(ccz):
    worst = max(distance_up_to_global_phase(qubit_unitary(ccz, d), CCZ_MATRIX) for d in SWEEP)
    assert worst < 1e-8


def test_unprotected_ccz_fails_under_detuning():
    c = build_unprotected_ccz()
    assert distance_up_to_global_phase(qubit_unitary(c), CCZ_MATRIX) < 1e-9
    assert max(distance_up_to_global_phase(qubit_unitary(c, d), CCZ_MATRIX) for d in SWEEP) > 0.1


def test_ccz_structure(ccz):
    ccz.validate()
    assert ccz.count("cx") == 2
    corrections = [g for g in ccz.gates if g.tag == "correction"]
    assert len(corrections) == 2 and all(g.sites == (SITE_C2,) for g in corrections)
    first_cx_end = min(g.end for g in ccz.gates if g.name == "cx")
    assert min(g.start for g in corrections) == first_cx_end
    assert max(g.start for g in corrections) == ccz.end
    dd = [g for g in ccz.gates if g.tag == "dd"]
    assert dd and {g.sites[0] for g in dd} == {SITE_C1, SITE_T}
    assert len(dd) % 2 == 0


def test_ccz_cycle_timing(ccz):
    inner = xplus_spacings(ccz, SITE_C2, tag="inner_cycle")
    assert len(inner) == 2 and inner[0] == inner[1]
    outer = xplus_spacings(ccz, SITE_C2, tag="cycle")
    plan = ccz.metadata["outer_plan"]
    assert outer == [plan["tau1"], plan["tau2"]]
    # the inner unit's detuning phase enters the outer unit as alpha_2
    assert plan["tau2"] - plan["alpha"][2] == plan["tau1"] - plan["alpha"][0]


def test_min_spacing_stretches_units():
    c = build_ccz(min_spacing=30)
    assert min(xplus_spacings(c, SITE_C2, tag="inner_cycle")) >= 30
    assert min(xplus_spacings(c, SITE_C2, tag="cycle")) >= 30
    assert max(distance_up_to_global_phase(qubit_unitary(c, d), CCZ_MATRIX) for d in (-0.2, 0.1)) < 1e-8


def test_toffoli_truth_table():
    t = build_toffoli()
    u = qubit_unitary(t)
    assert distance_up_to_global_phase(u, TOFFOLI_MATRIX) < 1e-9
    for label, expected in (("011", "111"), ("000", "000"), ("111", "011"), ("001", "001")):
        out = u[:, index_of_label(label)]
        assert abs(out[index_of_label(expected)]) == pytest.approx(1.0)


def test_eight_cx_reference():
    ref = build_qubit_toffoli_reference()
    assert ref.count("cx") == 8
    assert {tuple(sorted(g.sites)) for g in ref.gates if g.name == "cx"} <= {(0, 1), (1, 2)}
    u = circuit_unitary(ref).matrix
    assert distance_up_to_global_phase(u, TOFFOLI_MATRIX) < 1e-10
    for i in range(8):
        j = i ^ 1 if (i >> 1) == 0b11 else i
        assert abs(u[j, i]) == pytest.approx(1.0)


def test_identity_probes_are_identity():
    probes = build_identity_probes()
    assert set(probes) == {"xplus6", "id_a", "id_b", "id_c", "xplus3", "xplus_xminus"}
    for name, c in probes.items():
        assert distance_up_to_global_phase(qubit_unitary(c), np.eye(8)) < 1e-9, name
        assert truth_table(noisy_channel(c)).fidelity == pytest.approx(1.0)


def test_probe_timing_rules(ccz):
    probes = build_identity_probes()
    ccz_times = sorted(g.start for g in ccz.gates if g.name == "xplus")
    for name in ("id_a", "id_b", "id_c"):
        times = sorted(g.start for g in probes[name].gates if g.name == "xplus")
        assert times == ccz_times, name
    assert probes["xplus3"].end == probes["xplus_xminus"].end == ccz.end
    assert len(set(xplus_spacings(probes["xplus3"]))) == 1
    assert probes["id_a"].count("cx") == 0 and probes["id_c"].count("rxz") == 0
    assert probes["id_b"].count("rxz") == 2 and probes["id_c"].count("cx") == 2


def test_probe_detuning_response():
    probes = build_identity_probes()
    flat = [process_fidelity(noisy_channel(probes["xplus3"], d), np.eye(8)) for d in SWEEP]
    swing = [process_fidelity(noisy_channel(probes["xplus_xminus"], d), np.eye(8)) for d in SWEEP]
    assert max(flat) - min(flat) < 1e-6
    assert max(swing) - min(swing) > 0.1


def test_ramsey_pairs_cover_twelve_settings():
    pairs = ramsey_pairs()
    assert len(pairs) == 12
    assert all(sum(a != b for a, b in zip(j, k)) == 1 for j, k, _, _ in pairs)


def test_ramsey_on_ideal_ccz(ccz):
    ch = noisy_channel(ccz)
    phis = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    # label 101 vs 001 differ in Q_t with Q_c2 = 0, Q_c1 = 1
    fit = ramsey_phase_fit(phis, ramsey_probabilities(ch, SITE_T, {SITE_C2: 0, SITE_C1: 1}, phis))
    assert abs(fit.kappa) < 1e-8
    fit = ramsey_phase_fit(phis, ramsey_probabilities(ch, SITE_T, {SITE_C2: 1, SITE_C1: 1}, phis))
    assert abs(abs(fit.kappa) - math.pi) < 1e-8


def test_static_phase_calibration_nulls_coupling():
    from basiscycle.experiments import _ramsey_shift
    noise = NoiseModel(zz=((SITE_C2, SITE_C1, 0.004), (SITE_C2, SITE_T, 0.002)))
    assert calibrate_static_phases(NoiseModel()) == (0.0, 0.0)
    corr = calibrate_static_phases(noise)

    def shifts(c):
        ch = noisy_channel(build_ccz(corrections=c), 0.0, noise)
        return [_ramsey_shift(ch, SITE_C2, {SITE_C1: b, SITE_T: 0}) for b in (0, 1)]

    assert max(map(abs, shifts((0.0, 0.0)))) > 0.1
    assert max(map(abs, shifts(corr))) < 1e-9


def test_decoherence_calibration_hits_target():
    model = calibrate_decoherence(NoiseModel(2e-4, 4e-4, 1e-3, 1e-3), 0.93)
    f = process_fidelity(noisy_channel(build_ccz(), 0.0, model), CCZ_MATRIX)
    assert f == pytest.approx(0.93, abs=1e-5)
    with pytest.raises(ValueError):
        calibrate_decoherence(NoiseModel(), 0.93)
    with pytest.raises(ValueError):
        calibrate_decoherence(model, 1.5)


def test_config_validation_and_round_trip(tmp_path):
    cfg = StabilityConfig(hours=2, cadence=3, noise=NoiseConfig(readout_flip=0.01), walk=WalkConfig(step=0.1))
    back = StabilityConfig.from_dict(cfg.to_dict())
    assert back == cfg and config_hash(back) == config_hash(cfg)
    assert config_hash(cfg.replace(seed=1)) != config_hash(cfg)
    for bad in ({"cadence": 1}, {"mode": "x"}, {"shots": -1}, {"bogus": 1}, {"schema_version": 9},
                {"noise": {"idle_depol": -1}}, {"walk": {"start": 1.0}}, {"noise": {"target_fidelity": 2}}):
        with pytest.raises(ConfigError):
            StabilityConfig.from_dict(bad)
    with pytest.raises(ConfigError):
        ErrorAnalysisConfig.from_dict({"phase_points": 4})
    zz = StabilityConfig.from_dict({"noise": {"zz": [[0, 1, 0.01]]}})
    assert zz.noise.zz == ((0, 1, 0.01),)


def test_record_csv_format():
    recs = [ExperimentRecord(0.0, "ccz", "F_pro", 0.93123456789, 0.0012)]
    text = records_to_csv(recs)
    assert text.splitlines()[0] == "time_ticks,circuit_id,metric,value,sigma"
    assert text.splitlines()[1] == "0,ccz,F_pro,0.93123456789,0.0012"
    with pytest.raises(ValueError):
        ExperimentRecord(0.0, "ccz", "F", 1.0, -1.0)


def noiseless():
    return NoiseConfig(idle_depol=0, idle_dephase=0, gate_depol=0, gate_dephase=0, target_fidelity=None)


def test_stability_zero_noise_is_perfect(tmp_path):
    cfg = StabilityConfig(hours=4, cadence=3, shots=0, noise=noiseless(), walk=WalkConfig(amplitude=0.0, step=0.0))
    res = run_stability_experiment(cfg, out_dir=tmp_path)
    assert np.allclose(res.series("ccz", "F_pro"), 1.0, atol=1e-6)
    assert np.allclose(res.series("xplus_xminus", "F_pro"), 1.0, atol=1e-6)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert any(n.endswith(".csv") for n in names) and any(n.endswith(".svg") for n in names)
    assert any(n.endswith("_config.json") for n in names)


def test_stability_ftt_mode_json(tmp_path):
    cfg = StabilityConfig(hours=4, cadence=3, mode="ftt", noise=noiseless())
    res = run_stability_experiment(cfg, out_dir=tmp_path, fmt="json", plot=False)
    assert len(res.series("ccz", "F_TT")) == 3
    assert [p.suffix for p in res.files] == [".json", ".json"]


def test_error_analysis_noiseless():
    res = run_error_analysis(ErrorAnalysisConfig(shots=0, noise=noiseless()), plot=False)
    phi = res.summary["phi"]
    assert abs(abs(phi["111"]) - math.pi) < 1e-6
    assert all(abs(v) < 1e-6 for k, v in phi.items() if k != "111")
    assert np.allclose([r.value for r in res.records if r.metric.startswith("P_")], 1.0, atol=1e-6)
    assert all(v == pytest.approx(1.0) for v in res.summary["F_TT"].values())


def test_error_analysis_ladder_is_monotone():
    res = run_error_analysis(ErrorAnalysisConfig(shots=0), plot=False)
    ladder = [res.summary["F_TT"][k] for k in ("xplus6", "id_a", "id_b", "id_c", "ccz")]
    assert all(a >= b for a, b in zip(ladder, ladder[1:]))
    assert ladder[-1] < 1
