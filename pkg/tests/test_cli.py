"""
End-to-end tests of the command-line interface on a tiny run.
"""

import json

import pytest

from vmspod import cli
from vmspod.experiments import REPORT_FIELDS
from vmspod.utils import read_csv


TINY_FLAGS = [
    '--nx', '8', '--dt', '0.01', '--T', '0.2', '--epsilon', '1e-3',
    '--width', '0.1', '--r', '6', '--R', '3',
]


@pytest.fixture(scope='module')
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp('cli') / 'run'
    cli.main(['run', '--output', str(out)] + TINY_FLAGS)
    return out


def exit_code(argv):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(argv)
    return excinfo.value.code


def test_run_writes_every_artifact(run_dir):
    """Test that the full pipeline archives snapshots, basis, trajectories and the report."""
    for name in ('config.ini', 'vmspod.log', 'snapshots/states.bin', 'basis/modes.bin',
                 'rom/pod-g-trajectory.bin', 'rom/vms-pod-trajectory.bin'):
        assert (run_dir / name).exists(), name
    manifest = json.loads((run_dir / 'snapshots' / 'manifest.json').read_text())
    assert manifest['space_tag'] == 'P2-nx8-ll-ur'
    assert manifest['num_steps'] == 20

    rows = read_csv(run_dir / 'rom' / 'report.csv')
    assert [row['model'] for row in rows] == ['pod-g', 'vms-pod']
    assert tuple(rows[0]) == REPORT_FIELDS
    assert float(rows[1]['alpha']) >= 1 / 16


def test_rom_reuses_saved_run(run_dir):
    """Test that a later rom command reads the saved configuration and appends to the report."""
    before = len(read_csv(run_dir / 'rom' / 'report.csv'))
    cli.main(['rom', '--output', str(run_dir), '--model', 'vms-pod', '--r', '5', '--R', '2', '--alpha', '0.01'])
    rows = read_csv(run_dir / 'rom' / 'report.csv')
    assert len(rows) == before + 1
    last = rows[-1]
    assert (last['model'], last['r'], last['R'], last['N']) == ('vms-pod', '5', '2', '20')
    assert float(last['alpha']) == 0.01


def test_experiment_writes_table(run_dir):
    """Test the experiment command on an existing run."""
    cli.main(['experiment', 'table1', '--output', str(run_dir)])
    table = run_dir / 'tables' / 'table1.csv'
    assert table.read_text().splitlines()[0] == 'r,e'


def test_r_beyond_rank_fails(run_dir):
    """Test that asking for more modes than the snapshot rank exits with status 1."""
    assert exit_code(['rom', '--output', str(run_dir), '--r', '500', '--alpha', '0.1']) == 1


def test_no_command_exits_1(capsys):
    """Test that running without a command prints help and fails."""
    assert exit_code([]) == 1
    assert 'usage' in capsys.readouterr().out


def test_invalid_flag_value_exits_1(tmp_path):
    """Test that configuration errors are fatal."""
    assert exit_code(['dns', '--output', str(tmp_path / 'bad'), '--nx', '1']) == 1


def test_missing_snapshots_exits_1(tmp_path):
    """Test that rom on an empty run directory fails cleanly."""
    assert exit_code(['rom', '--output', str(tmp_path / 'empty')]) == 1


def test_interrupt_exits_130(monkeypatch, tmp_path):
    """Test the exit status on Ctrl-C."""
    def interrupted(args):
        raise KeyboardInterrupt

    monkeypatch.setattr(cli, 'cmd_dns', interrupted)
    assert exit_code(['dns', '--output', str(tmp_path)]) == 130


def test_verbose_reraises(tmp_path):
    """Test that --verbose surfaces the original exception."""
    with pytest.raises(FileNotFoundError):
        cli.main(['rom', '--output', str(tmp_path / 'empty'), '--verbose'])


def test_states_only_pod(run_dir):
    """Test that --states-only rebuilds the basis from the N+1 states and records it in the run."""
    cli.main(['pod', '--output', str(run_dir), '--states-only'])
    manifest = json.loads((run_dir / 'basis' / 'manifest.json').read_text())
    assert manifest['quotients'] is False
    assert manifest['snapshot_count'] == 21
    assert 'quotients = false' in (run_dir / 'config.ini').read_text()
