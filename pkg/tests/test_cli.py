import copy
import json
from pathlib import Path
from typing import Any, Dict, List

import pytest

from pytorch_mpdbm.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, EXIT_VERIFICATION, main
from pytorch_mpdbm.cli.checkpoint import MANIFEST, PAYLOAD, load_checkpoint
from tests.constants import TINY_CONFIG


def write_config(directory: Path, **overrides) -> str:
    config: Dict[str, Any] = copy.deepcopy(TINY_CONFIG)
    for section, values in overrides.items():
        if isinstance(values, dict):
            config.setdefault(section, {}).update(values)
        else:
            config[section] = values

    path = directory / 'config.json'
    path.write_text(json.dumps(config))
    return str(path)


def read_jsonl(path: Path) -> List[Dict[str, Any]]:
    return [json.loads(line) for line in path.read_text().splitlines()]


@pytest.fixture
def trained(tmp_path):
    out = tmp_path / 'run'
    config = write_config(tmp_path)
    assert main(['train', '--config', config, '--out', str(out)]) == EXIT_OK
    return config, out


def test_train(capsys, trained):
    _, out = trained

    assert capsys.readouterr().out.strip() == str(out / 'checkpoint')
    assert load_checkpoint(out / 'checkpoint').epoch == 2

    records = read_jsonl(out / 'train.jsonl')
    assert [r['epoch'] for r in records] == [1, 2]
    assert all(r['validation_error'] is not None for r in records)
    assert (out / 'train.csv').read_text().splitlines()[0].startswith('epoch,train_loss')
    assert json.loads((out / 'config.json').read_text())['out'] == str(out)


def test_train_deterministic(tmp_path, trained):
    config, out = trained
    other = tmp_path / 'again'

    assert main(['train', '--config', config, '--out', str(other)]) == EXIT_OK
    assert (other / 'checkpoint' / PAYLOAD).read_bytes() == (out / 'checkpoint' / PAYLOAD).read_bytes()

    assert main(['train', '--config', config, '--out', str(tmp_path / 'seed'), '--seed', '1']) == EXIT_OK
    assert (tmp_path / 'seed' / 'checkpoint' / PAYLOAD).read_bytes() != (out / 'checkpoint' / PAYLOAD).read_bytes()


def test_train_pcd(tmp_path):
    config = write_config(tmp_path, method='pcd', model={'init': {'centered': True}})

    assert main(['train', '--config', config, '--out', str(tmp_path)]) == EXIT_OK

    checkpoint = load_checkpoint(tmp_path / 'checkpoint')
    assert checkpoint.params.is_centered
    assert checkpoint.extra['method'] == 'pcd'
    assert len(checkpoint.buffers) == 3


def test_resume(tmp_path, trained):
    _, out = trained
    config = write_config(tmp_path, mp={'epochs': 3})

    assert main(['train', '--config', config, '--out', str(out), '--resume', str(out / 'checkpoint')]) == EXIT_OK
    assert load_checkpoint(out / 'checkpoint').epoch == 3
    assert [r['epoch'] for r in read_jsonl(out / 'train.jsonl')] == [1, 2, 3]


def test_resume_shape_mismatch(tmp_path, trained):
    _, out = trained
    config = write_config(tmp_path, model={'layer_sizes': [5]})

    assert main(['train', '--config', config, '--out', str(out), '--resume', str(out / 'checkpoint')]) == EXIT_RUNTIME


def test_inspect(trained, capsys):
    config, out = trained
    capsys.readouterr()

    assert main(['inspect', '--config', config, str(out / 'checkpoint')]) == EXIT_OK

    summary = json.loads(capsys.readouterr().out)
    assert summary['version'] == 1
    assert summary['epoch'] == 2
    assert summary['method'] == 'mp'
    assert summary['shape'] == {'d': 6, 'layer_sizes': [4], 'k': 2}
    assert summary['tensors']['weights.0']['dims'] == [6, 4]


@pytest.mark.parametrize(
    ('evaluation', 'keys'),
    [
        ({'mode': 'classify'}, ['error_rate']),
        ({'mode': 'missing_inputs'}, [0.0, 0.5]),
        ({'mode': 'general_query', 'inference': 'multi_inference'}, [1, 2]),
        ({'mode': 'inpaint', 'split': 'validation'}, ['n_examples']),
    ],
)
def test_eval(tmp_path, trained, evaluation, keys):
    _, out = trained
    config = write_config(tmp_path, eval=evaluation)

    assert main(['eval', '--config', config, '--out', str(out), str(out / 'checkpoint')]) == EXIT_OK

    rows = read_jsonl(out / 'eval.jsonl')
    assert [row['key'] for row in rows] == keys
    assert all(row['mode'] == evaluation['mode'] for row in rows)

    if evaluation['mode'] == 'inpaint':
        records = read_jsonl(out / 'inpaint.jsonl')
        assert len(records) == 10
        assert len(records[0]['v']) == TINY_CONFIG['eval']['n_iters'] + 1


def test_oracle_check(tmp_path):
    config = write_config(tmp_path)

    assert main(['oracle-check', '--config', config, '--out', str(tmp_path)]) == EXIT_OK

    report = json.loads((tmp_path / 'oracle_check.json').read_text())
    assert report['passed']
    assert {check['name'] for check in report['checks']} == {
        'gradient',
        'kl_monotone',
        'gibbs_stationarity',
        'centering_equivalence',
    }


def test_oracle_check_corrupted_gradient(tmp_path):
    config = write_config(tmp_path, oracle={'corrupt_gradient': True})

    assert main(['oracle-check', '--config', config, '--out', str(tmp_path)]) == EXIT_VERIFICATION

    report = json.loads((tmp_path / 'oracle_check.json').read_text())
    assert not report['passed']
    assert not any(check['passed'] for check in report['checks'] if check['name'] == 'gradient')


def test_oracle_check_enumeration_bound(tmp_path):
    config = write_config(tmp_path, oracle={'d': 20, 'layer_sizes': [4]})

    assert main(['oracle-check', '--config', config, '--out', str(tmp_path)]) == EXIT_CONFIG


@pytest.mark.parametrize(
    'argv',
    [
        [],
        ['sample'],
        ['eval'],
        ['train', '--seed', 'x'],
    ],
)
def test_usage_errors(argv):
    assert main(argv) == EXIT_CONFIG


def test_config_errors(tmp_path, capsys):
    config = write_config(tmp_path, mp={'n_mf_iter': 3})

    assert main(['train', '--config', config, '--out', str(tmp_path)]) == EXIT_CONFIG
    assert 'mp.n_mf_iter' in capsys.readouterr().err


def test_thread_override(tmp_path, monkeypatch):
    config = write_config(tmp_path)

    monkeypatch.setenv('MPDBM_THREADS', 'many')
    assert main(['oracle-check', '--config', config, '--out', str(tmp_path)]) == EXIT_CONFIG

    monkeypatch.setenv('MPDBM_THREADS', '0')
    assert main(['oracle-check', '--config', config, '--out', str(tmp_path)]) == EXIT_CONFIG


def test_runtime_errors(tmp_path, trained):
    config, out = trained

    assert main(['eval', '--config', config, str(tmp_path / 'missing')]) == EXIT_RUNTIME

    payload = bytearray((out / 'checkpoint' / PAYLOAD).read_bytes())
    payload[0] ^= 0xFF
    (out / 'checkpoint' / PAYLOAD).write_bytes(bytes(payload))
    assert main(['inspect', str(out / 'checkpoint')]) == EXIT_RUNTIME


def test_train_writes_best_checkpoint(tmp_path):
    out = tmp_path / 'run'
    config = write_config(tmp_path, mp={'epochs': 3, 'patience': 2})

    assert main(['train', '--config', config, '--out', str(out)]) == EXIT_OK

    best = load_checkpoint(out / 'best')
    last = load_checkpoint(out / 'checkpoint')
    assert best.shape == last.shape
    assert best.epoch == last.epoch
    assert (out / 'best' / MANIFEST).exists()


def test_train_without_patience_writes_no_best_checkpoint(trained):
    _, out = trained
    assert not (out / 'best').exists()
