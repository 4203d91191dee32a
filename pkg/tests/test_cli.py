import json

import numpy as np
import pytest

from starcert import __version__
from starcert.commands.sweep import sweep_scene
from starcert.io_formats import read_manifest, read_report
from starcert.runcli import build_parser, main

SMALL_SCENE = ['--width', '64', '--height', '64', '--instances', '4']


def _synth(out, *extra):
    assert main(['synth', '--out', str(out), *SMALL_SCENE, '--passes', '5', '--seed', '1', *extra]) == 0
    return out


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob('*')) if p.is_file()}


def test_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(['--version'])
    assert e.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_help_lists_threshold_defaults(capsys, monkeypatch):
    monkeypatch.setenv('COLUMNS', '200')
    with pytest.raises(SystemExit):
        main(['cluster', '--help'])
    out = capsys.readouterr().out
    assert '--theta-iou' in out and '--theta-d' in out
    assert 'default: 0.5' in out


def test_synth_writes_a_readable_sample_set(tmp_path):
    out = _synth(tmp_path / 'set', '--name', 'noiseless')
    manifest = read_manifest(out)
    assert (manifest.mode, manifest.passes, manifest.width, manifest.name) == ('dense', 5, 64, 'noiseless')
    assert manifest.ground_truth is not None
    assert read_manifest(out / 'instances').mode == 'instances'


def test_synth_is_byte_identical_for_a_seed(tmp_path):
    noisy = ['--p-det', '0.7', '--sigma-radius', '0.1', '--sigma-prob', '0.02']
    a = _files(_synth(tmp_path / 'a', *noisy))
    b = _files(_synth(tmp_path / 'b', *noisy, '--threads', '3'))
    assert a == b


def test_synth_without_instances(tmp_path):
    assert main(['synth', '--out', str(tmp_path / 'empty'), '--instances', '0', '--passes', '2']) == 0
    assert main(['cluster', str(tmp_path / 'empty'), '--out', str(tmp_path / 'report')]) == 0
    assert read_report(tmp_path / 'report' / 'report.json').entries == []


@pytest.mark.parametrize('method', ['radial', 'pixel'])
def test_noiseless_set_scores_every_cluster_one(tmp_path, method):
    out = _synth(tmp_path / 'set')
    assert main(['cluster', str(out), '--out', str(tmp_path / 'report'), '--method', method]) == 0
    report = read_report(tmp_path / 'report' / 'report.json')
    assert report.metadata['method'] == method
    assert len(report.entries) == 4
    for entry in report.entries:
        assert entry.size == 5
        assert entry.scores.c_hyb == pytest.approx(1.0, abs=1e-9)
    assert report.calibration['c_hyb']['ece'] == 0.0
    assert report.calibration['c_hyb']['matched'] == 4


def test_pixel_method_on_instance_polygons(tmp_path, four_pass_dir):
    assert main(['cluster', str(four_pass_dir), '--method', 'pixel', '--out', str(tmp_path)]) == 0
    report = read_report(tmp_path / 'report.json')
    assert [e.size for e in report.entries] == [4, 1, 3]
    assert [e.scores.c_frac for e in report.entries] == [1.0, 0.25, 0.75]
    assert report.calibration is None
    assert report.metadata['name'] == 'four-pass'


def test_radial_method_needs_dense_input(tmp_path, four_pass_dir, capsys):
    assert main(['cluster', str(four_pass_dir), '--method', 'radial', '--out', str(tmp_path / 'r')]) == 18
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])['error'] == 'method_mismatch'
    assert not (tmp_path / 'r' / 'report.json').exists()


def test_invalid_threshold_is_a_flag_error(tmp_path, four_pass_dir):
    assert main(['cluster', str(four_pass_dir), '--method', 'pixel', '--theta-iou', '1.5',
                 '--out', str(tmp_path)]) == 20


def test_missing_manifest(tmp_path):
    assert main(['cluster', str(tmp_path / 'nowhere'), '--out', str(tmp_path / 'r')]) == 2


def test_calibrate_a_noiseless_report(tmp_path):
    out = _synth(tmp_path / 'set', '--name', 'Noiseless Scene')
    assert main(['cluster', str(out), '--out', str(tmp_path / 'report')]) == 0
    assert main(['calibrate', str(tmp_path / 'report'), '--out', str(tmp_path / 'cal')]) == 0

    doc = json.loads((tmp_path / 'cal' / 'calibration.json').read_text())
    assert doc['bins'] == 10
    for name in ('c_spl', 'c_frac', 'c_hyb'):
        assert doc['scores'][name]['ece'] == 0.0
        assert doc['scores'][name]['mce'] == 0.0
        lines = (tmp_path / 'cal' / f'reliability_{name}.csv').read_text().splitlines()
        assert lines[0] == 'bin_lo,bin_hi,count,mean_confidence,accuracy'
        assert lines[-1] == '0.9,1.0,4,1.0,1.0'
        assert '<svg' in (tmp_path / 'cal' / f'reliability_{name}.svg').read_text()
    assert (tmp_path / 'cal' / 'overlay-noiseless-scene.svg').exists()


def test_calibrate_pools_several_reports(tmp_path):
    for seed in ('1', '2'):
        out = tmp_path / f'set{seed}'
        assert main(['synth', '--out', str(out), *SMALL_SCENE, '--passes', '4', '--seed', seed,
                     '--p-det', '0.6', '--sigma-radius', '0.1']) == 0
        assert main(['cluster', str(out), '--out', str(tmp_path / f'report{seed}')]) == 0
    assert main(['calibrate', str(tmp_path / 'report1'), str(tmp_path / 'report2'),
                 '--out', str(tmp_path / 'cal')]) == 0
    doc = json.loads((tmp_path / 'cal' / 'calibration.json').read_text())
    counts = [sum(b['count'] for b in doc['scores'][name]['bins']) for name in ('c_spl', 'c_frac', 'c_hyb')]
    entries = sum(len(read_report(tmp_path / f'report{s}' / 'report.json').entries) for s in ('1', '2'))
    assert counts == [entries] * 3
    assert len(list((tmp_path / 'cal').glob('overlay-*.svg'))) == 2


def test_calibrate_without_ground_truth(tmp_path, four_pass_dir):
    assert main(['cluster', str(four_pass_dir), '--method', 'pixel', '--out', str(tmp_path / 'report')]) == 0
    assert main(['calibrate', str(tmp_path / 'report'), '--out', str(tmp_path / 'cal')]) == 19
    assert main(['calibrate', str(tmp_path / 'report'), str(tmp_path / 'report'),
                 '--ground-truth', str(tmp_path / 'gt.bin'), '--out', str(tmp_path / 'cal')]) == 20


def test_half_detected_instances_have_half_fractional_certainty(tmp_path):
    out = tmp_path / 'set'
    assert main(['synth', '--out', str(out), '--passes', '20', '--p-det', '0.5', '--seed', '0']) == 0
    assert main(['cluster', str(out), '--out', str(tmp_path / 'report')]) == 0
    report = read_report(tmp_path / 'report' / 'report.json')
    assert report.entries
    assert 0.35 <= np.mean([e.scores.c_frac for e in report.entries]) <= 0.65


def test_small_bench(tmp_path):
    assert main(['bench', '--sizes', '5,10', '--passes', '2', '--out', str(tmp_path)]) == 0
    lines = (tmp_path / 'bench.csv').read_text().splitlines()
    assert lines[0] == 'method,instances,predictions,seconds'
    assert len(lines) == 5
    doc = json.loads((tmp_path / 'bench.json').read_text())
    assert set(doc['slopes']) == {'bsas', 'radial'}


def test_small_sweep_is_deterministic(tmp_path):
    args = ['sweep-passes', '--passes', '2,3', '--seeds', '0-1', '--width', '64', '--height', '64',
            '--instances', '3']
    assert main([*args, '--out', str(tmp_path / 'a')]) == 0
    assert main([*args, '--out', str(tmp_path / 'b'), '--threads', '2']) == 0
    text = (tmp_path / 'a' / 'sweep.csv').read_text()
    assert text == (tmp_path / 'b' / 'sweep.csv').read_text()
    lines = text.splitlines()
    assert lines[0] == 'passes,metric,mean,std,n'
    assert len(lines) == 1 + 2 * 3


def test_sweep_defaults_to_the_faithful_heterogeneous_suite():
    spec, noise = sweep_scene(build_parser().parse_args(['sweep-passes', '--out', 'unused']), {})
    assert spec.instances == 12
    assert (noise.heterogeneous, noise.faithful, noise.sigma_radius) == (True, True, 0.1)

    args = build_parser().parse_args(['sweep-passes', '--out', 'unused', '--unfaithful', '--homogeneous'])
    _, noise = sweep_scene(args, {})
    assert not noise.faithful
    assert not noise.heterogeneous
