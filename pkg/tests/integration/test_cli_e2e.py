"""
End-to-end tests for the command-line interface.

Tests complete flow: CLI -> configuration -> computation -> result files
"""
import csv
import json
import math

import pytest
import yaml

from whitlab.cli import EXIT_CHECK_FAILED, EXIT_CONFIGURATION, EXIT_OK, WhitLabCLI
from whitlab.cli_commands import CONVERGENCE_TARGET
from whitlab.config.parser import OUTPUT_DIR_ENV
from whitlab.core.elements import LatticePoint
from whitlab.output import read_binary_trajectory, read_config_hash

FAST = ['--epsabs', '1e-9', '--epsrel', '1e-7', '--workers', '1', '-q']


def _rows(path):
    with open(path) as f:
        lines = [line for line in f if not line.startswith('#')]
    return list(csv.DictReader(lines))


def _expected_code(rows):
    """Exit code implied by a converge table: every sweep decreasing and on target."""
    passed = True
    for mode in {r['mode'] for r in rows}:
        sweep = [r for r in rows if r['mode'] == mode]
        passed &= all(r['decreasing'] == 'True' for r in sweep)
        passed &= float(sweep[-1]['rel_error']) <= CONVERGENCE_TARGET
    return EXIT_OK if passed else EXIT_CHECK_FAILED


class TestFrontEnd:
    """Test exit codes of the front end."""

    def test_no_command(self, capsys) -> None:
        """Test a bare invocation prints help and exits 2."""
        assert WhitLabCLI().run([]) == EXIT_CONFIGURATION
        assert "usage" in capsys.readouterr().out

    def test_bad_flag(self) -> None:
        """Test an unknown flag exits 2."""
        assert WhitLabCLI().run(['c1', '--no-such-flag']) == EXIT_CONFIGURATION

    def test_version(self) -> None:
        """Test --version exits 0."""
        assert WhitLabCLI().run(['--version']) == EXIT_OK

    def test_missing_config(self, tmp_path) -> None:
        """Test a missing experiment file exits 2."""
        assert WhitLabCLI().run(['c1', '-c', str(tmp_path / "nope.yaml")]) == EXIT_CONFIGURATION

    def test_invalid_config(self, tmp_path) -> None:
        """Test an invalid experiment file exits 2."""
        config_file = tmp_path / "bad.yaml"
        config_file.write_text("qgrowth:\n  q: 2.0\n")
        assert WhitLabCLI().run(['qgrowth', '-c', str(config_file)]) == EXIT_CONFIGURATION

    def test_example_config(self, capsys) -> None:
        """Test the printed example is a valid experiment file."""
        assert WhitLabCLI().run(['example-config']) == EXIT_OK
        example = yaml.safe_load(capsys.readouterr().out)
        assert example['rng']['seed'] > 0
        assert 'holder' in example


class TestIdentitiesCommand:
    """Test the identities command."""

    def test_filtered_suite(self, tmp_path) -> None:
        """Test one suite passes and its summary is written."""
        code = WhitLabCLI().run(['identities', '--filter', 'shift', '--instances', '50',
                                 '-o', str(tmp_path), '-q'])
        assert code == EXIT_OK
        summary = json.loads((tmp_path / "identities.json").read_text())
        assert summary['valid'] is True
        assert list(summary['info']) == ['shift']
        assert summary['info']['shift']['failures'] == 0
        assert len(summary['config_sha256']) == 64

    def test_injected_fault(self, tmp_path) -> None:
        """Test a corrupted suite exits 1 and reports failures."""
        code = WhitLabCLI().run(['identities', '--filter', 'sigma_delta', '--instances', '20',
                                 '--inject-fault', 'sigma_delta', '-o', str(tmp_path), '-q'])
        assert code == EXIT_CHECK_FAILED
        summary = json.loads((tmp_path / "identities.json").read_text())
        assert summary['valid'] is False
        assert summary['info']['sigma_delta']['failures'] > 0

    def test_unknown_suite(self, tmp_path) -> None:
        """Test an unknown suite name exits 2."""
        code = WhitLabCLI().run(['identities', '--filter', 'nonsense', '-o', str(tmp_path), '-q'])
        assert code == EXIT_CONFIGURATION


class TestConvergeCommand:
    """Test the converge command."""

    def test_refuses_diagonal(self, tmp_path) -> None:
        """Test s = t with x = y is refused with exit 2."""
        code = WhitLabCLI().run(['converge', '--x', '0,0', '--y', '0,0', '--s', '1', '--t', '1',
                                 '-o', str(tmp_path), '-q'])
        assert code == EXIT_CONFIGURATION
        assert not (tmp_path / "converge.csv").exists()

    def test_refuses_reversed_times(self, tmp_path) -> None:
        """Test s > t is refused."""
        code = WhitLabCLI().run(['converge', '--s', '2', '--t', '1', '-o', str(tmp_path), '-q'])
        assert code == EXIT_CONFIGURATION

    def test_point_sweep(self, tmp_path) -> None:
        """Test a two-level pointwise sweep writes one row per N."""
        code = WhitLabCLI().run(['converge', '--point', '--N', '256,1024', '-o', str(tmp_path)] + FAST)
        rows = _rows(tmp_path / "converge.csv")
        assert code == _expected_code(rows)
        assert [int(r['N']) for r in rows] == [256, 1024]
        assert all(r['mode'] == 'point' for r in rows)
        limit = float(rows[0]['limit'])
        assert math.isfinite(limit)
        for r in rows:
            assert float(r['abs_error']) == pytest.approx(abs(float(r['recentered']) - limit))

    def test_both_sweeps_by_default(self, tmp_path) -> None:
        """Test one table holds the point and the mixture sweep."""
        code = WhitLabCLI().run(['converge', '--N', '256,1024', '--spatial-nodes', '8',
                                 '-o', str(tmp_path)] + FAST)
        rows = _rows(tmp_path / "converge.csv")
        assert [(r['mode'], int(r['N'])) for r in rows] == [
            ('point', 256), ('point', 1024), ('weak', 256), ('weak', 1024)]
        assert code == _expected_code(rows)

    def test_missed_target_fails(self, tmp_path) -> None:
        """Test a sweep ending above the relative-error target exits 1."""
        code = WhitLabCLI().run(['converge', '--point', '--json', '--N', '256,1024',
                                 '--s', '1', '--t', '1', '--x', '0,0', '--y', '0.05,0',
                                 '-o', str(tmp_path)] + FAST)
        assert code == EXIT_CHECK_FAILED
        document = json.loads((tmp_path / "converge.json").read_text())
        assert document['summary']['passed'] is False
        point = document['summary']['sweeps']['point']
        assert point['within_target'] is False
        assert point['final_rel_error'] > CONVERGENCE_TARGET

    def test_weak_recenters_mass(self, tmp_path) -> None:
        """Test a mass-carrying mixture is re-centered and the table says so."""
        config_file = tmp_path / "experiment.yaml"
        config_file.write_text(
            "converge:\n"
            "  phi1:\n"
            "    - {weight: 1.0, center: [0.0, 0.0], width: 1.0}\n"
        )
        out = tmp_path / "out"
        code = WhitLabCLI().run(['converge', '--weak', '-c', str(config_file), '--N', '256,1024',
                                 '--spatial-nodes', '8', '-o', str(out)] + FAST)
        rows = _rows(out / "converge.csv")
        assert code == _expected_code(rows)
        assert all(r['mode'] == 'weak' for r in rows)
        assert all("phi1 re-centered" in r['note'] for r in rows)
        assert not any("phi2" in r['note'] for r in rows)


class TestConstantCommands:
    """Test the c1 and kappa0 commands."""

    def test_c1_json(self, tmp_path) -> None:
        """Test c1 with its audit trail and c_N values."""
        code = WhitLabCLI().run(['c1', '--json', '--N', '256,1024', '-o', str(tmp_path)] + FAST)
        assert code == EXIT_OK
        document = json.loads((tmp_path / "c1.json").read_text())
        assert document['constant'] == 'c1'
        assert document['audit']['segments']
        assert set(document['recentering']) == {'256', '1024'}
        assert document['recentering']['1024'] > document['recentering']['256']

    def test_kappa0_csv(self, tmp_path) -> None:
        """Test kappa0 matches its closed form."""
        code = WhitLabCLI().run(['kappa0', '--csv', '-o', str(tmp_path)] + FAST)
        assert code == EXIT_OK
        rows = _rows(tmp_path / "kappa0.csv")
        assert rows[0]['component'] == 'kappa0'
        assert rows[-1]['component'] == 'closed_form'
        assert float(rows[0]['value']) == pytest.approx(float(rows[-1]['value']), abs=1e-6)

    def test_audit_log(self, tmp_path) -> None:
        """Test --audit-log appends the integral."""
        log_file = tmp_path / "audit.jsonl"
        code = WhitLabCLI().run(['kappa0', '--audit-log', str(log_file), '-o', str(tmp_path)] + FAST)
        assert code == EXIT_OK
        entry = json.loads(log_file.read_text().splitlines()[-1])
        assert entry['label'] == 'kappa0'


class TestSimulateCommand:
    """Test the simulate command."""

    def test_death_mode(self, tmp_path) -> None:
        """Test the marginal table against Binomial(m0, e^-t)."""
        code = WhitLabCLI().run(['simulate', '--mode', 'death', '--m0', '30', '--paths', '500',
                                 '--times', '0.5,1.0', '-o', str(tmp_path), '-q'])
        assert code == EXIT_OK
        rows = _rows(tmp_path / "simulate_death.csv")
        assert len(rows) == 2
        assert float(rows[0]['binomial_mean']) == pytest.approx(30 * math.exp(-0.5))

    def test_gaussian_reproducible(self, tmp_path) -> None:
        """Test equal seeds give byte-identical dumps in different directories."""
        first, second = tmp_path / "a", tmp_path / "b"
        argv = ['simulate', '--mode', 'gaussian', '--paths', '50', '--points', '1,1', '2,2',
                '--seed', '11']
        assert WhitLabCLI().run(argv + ['-o', str(first)] + FAST) == EXIT_OK
        assert WhitLabCLI().run(argv + ['-o', str(second)] + FAST) == EXIT_OK
        dump = "simulate_gaussian.csv"
        assert (first / dump).read_bytes() == (second / dump).read_bytes()
        assert read_config_hash(str(first / dump)) == read_config_hash(str(second / dump))
        rows = _rows(first / "simulate_gaussian_covariance.csv")
        assert len(rows) == 10

    def test_env_output_dir(self, tmp_path, monkeypatch) -> None:
        """Test WHITLAB_OUTPUT_DIR is used without -o."""
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "env"))
        code = WhitLabCLI().run(['simulate', '--mode', 'death', '--m0', '5', '--paths', '20', '-q'])
        assert code == EXIT_OK
        assert (tmp_path / "env" / "simulate_death.csv").exists()


class TestQgrowthCommand:
    """Test the qgrowth command."""

    def test_binary_dump(self, tmp_path) -> None:
        """Test the packed start is dumped and read back."""
        code = WhitLabCLI().run(['qgrowth', '--L', '3', '--q', '0.5', '--horizon', '2',
                                 '--snapshots', '5', '--dump', 'binary', '-o', str(tmp_path), '-q'])
        assert code == EXIT_OK
        times, points, values = read_binary_trajectory(str(tmp_path / "qgrowth.bin"))
        assert times.tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
        assert points[0] == LatticePoint(1, 1)
        assert values.shape == (1, 5, 6)
        assert values[0, 0].tolist() == [0] * 6
        rows = _rows(tmp_path / "qgrowth_heights.csv")
        assert [float(r['time']) for r in rows] == times.tolist()

    @pytest.mark.parametrize("dump", ['csv', 'binary'])
    def test_seed_reproducible(self, tmp_path, dump) -> None:
        """Test equal seeds give byte-identical trajectories in different directories."""
        first, second = tmp_path / "a", tmp_path / "b"
        argv = ['qgrowth', '--L', '3', '--q', '0.5', '--horizon', '2', '--snapshots', '5',
                '--dump', dump, '--seed', '23', '-q']
        assert WhitLabCLI().run(argv + ['-o', str(first)]) == EXIT_OK
        assert WhitLabCLI().run(argv + ['-o', str(second)]) == EXIT_OK
        name = "qgrowth.csv" if dump == 'csv' else "qgrowth.bin"
        assert (first / name).read_bytes() == (second / name).read_bytes()
        heights = "qgrowth_heights.csv"
        assert (first / heights).read_bytes() == (second / heights).read_bytes()


class TestHolderCommand:
    """Test the holder command."""

    ARGV = ['holder', '--levels', '256', '--gaps', '0.2', '--spatial-nodes', '8']

    def test_single_cell(self, tmp_path, capsys) -> None:
        """Test one cell gives unit spreads and exit 0."""
        code = WhitLabCLI().run(self.ARGV + ['--json', '-o', str(tmp_path)] + FAST)
        assert code == EXIT_OK
        document = json.loads((tmp_path / "holder.json").read_text())
        assert len(document['rows']) == 1
        assert all(document['summary']['bounded'].values())
        assert all(v == 1.0 for v in document['summary']['spreads'].values())
        assert "✗" not in capsys.readouterr().out

    def test_unbounded_column_fails(self, tmp_path, monkeypatch, capsys) -> None:
        """Test a spread above the limit exits 1 and names the column."""
        monkeypatch.setattr("whitlab.cli_commands.HOLDER_SPREAD_LIMIT", 0.5)
        code = WhitLabCLI().run(self.ARGV + ['-o', str(tmp_path)] + FAST)
        assert code == EXIT_CHECK_FAILED
        assert "✗ ratio_I_half" in capsys.readouterr().out
        assert (tmp_path / "holder.csv").exists()
