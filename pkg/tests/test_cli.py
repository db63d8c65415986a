import pytest

from qtree import cli
from qtree.figures import data_text


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestRun:
    def test_single_run_writes_trace(self, capsys, tmp_path):
        path = tmp_path / "out.trc"
        code, out, _ = run_cli(capsys, "run", "--protocol", "paxos", "--n", "3", "--f", "1",
                               "--seed", "42", "--steps", "500", "--trace", str(path))
        assert code == 0 and "refinement=pass" in out
        first = path.read_text()
        run_cli(capsys, "run", "--protocol", "paxos", "--seed", "42", "--trace", str(path))
        assert path.read_text() == first

    def test_seed_range(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "run", "--protocol", "pbft", "--f", "1", "--byzantine", "1",
                               "--strategy", "equivocate", "--seeds", "1..20", "--quiet",
                               "--trace", str(tmp_path / "t"))
        assert code == 0 and out.splitlines()[-1] == "runs=20 failed=0"
        assert len(list(tmp_path.iterdir())) == 20

    def test_flexible_quorum_schedule_fails(self, capsys, tmp_path):
        sched = tmp_path / "bad.sched"
        sched.write_text(data_text("flexible.sched"))
        code, out, _ = run_cli(capsys, "run", "--protocol", "multipaxos", "--q1", "1", "--q2", "2",
                               "--n", "4", "--values", "va,vx,vb", "--schedule", str(sched))
        assert code == 1 and "reject:P3-conflict" in out and "violation agreement" in out

    def test_config_file_with_flag_override(self, capsys, tmp_path):
        conf = tmp_path / "c.conf"
        conf.write_text("protocol = raft\nn = 5\nf = 2\ndrop_prob = 0.1\n")
        code, out, _ = run_cli(capsys, "run", "--config", str(conf), "--seed", "3")
        assert code == 0 and "mode=smr" in out

    @pytest.mark.parametrize("argv", [
        ["run", "--protocol", "zab"],
        ["run", "--protocol", "pbft", "--n", "3"],
        ["run", "--seeds", "5..1"],
        ["run", "--config", "/nonexistent.conf"],
        ["frobnicate"],
    ])
    def test_usage_errors(self, capsys, argv):
        with pytest.raises(SystemExit) as exc:
            code = cli.main(argv)
            raise SystemExit(code)
        assert exc.value.code == 2


class TestCheck:
    def test_golden_trace(self, capsys, tmp_path):
        path = tmp_path / "fig3.trace"
        path.write_text(data_text("fig3.trace"))
        code, out, _ = run_cli(capsys, "check", str(path))
        assert code == 0 and out.startswith("refinement=pass")

    def test_duplicate_add(self, capsys, tmp_path):
        path = tmp_path / "dup.seq"
        path.write_text("op=add r=1 v=a rp=0\nop=add r=1 v=a rp=0\n")
        code, out, _ = run_cli(capsys, "check", str(path))
        assert code == 1 and "declarative=reject:P1-dup-add:1" in out

    @pytest.mark.parametrize("text, code, expected", [
        ("op=add r=1 v=a rp=0\nop=commit r=3 res=FAIL\n", 0, "replay=accept"),
        ("op=add r=1 v=a rp=0\nop=commit r=1 res=FAIL\n", 1, "replay=reject:replay-mismatch:1"),
        ("op=commit r=3 res=FAIL\nop=commit r=1\n", 1, "declarative=reject:P0-missing-add:1"),
    ])
    def test_failed_labels(self, capsys, tmp_path, text, code, expected):
        path = tmp_path / "fails.seq"
        path.write_text(text)
        got, out, _ = run_cli(capsys, "check", str(path))
        assert got == code and expected in out and "concordant=true" in out

    def test_empty_file_accepted(self, capsys, tmp_path):
        path = tmp_path / "empty"
        path.write_text("")
        assert run_cli(capsys, "check", str(path))[0] == 0

    def test_parse_error_has_line_number(self, capsys, tmp_path):
        path = tmp_path / "bad.seq"
        path.write_text("op=add r=1 v=a rp=0\nop=add r=x\n")
        code, _, err = run_cli(capsys, "check", str(path))
        assert code == 2 and "line 2" in err


class TestEnumerate:
    def test_zero_length(self, capsys):
        code, out, _ = run_cli(capsys, "enumerate", "--max-len", "0", "--mode", "smr")
        assert code == 0 and out == "mode=smr sequences=1 accepted=1 rejected=0 discordant=0\n"

    def test_refuses_large_bounds(self, capsys):
        code, _, err = run_cli(capsys, "enumerate", "--max-len", "9")
        assert code == 2 and "refusing" in err

    def test_broken_checker_prints_discordance(self, capsys, monkeypatch):
        from qtree.checker import replay
        args = cli.build_parser().parse_args(["enumerate", "--max-len", "1", "--max-round", "1",
                                              "--values", "1", "--mode", "single-decree"])
        broken = {"declarative": lambda seq, mode: replay([], mode)}
        code = cli.cmd_enumerate(args, checkers=broken)
        out = capsys.readouterr().out
        assert code == 1
        assert "discordant mode=single-decree declarative=accept replay=reject:replay-mismatch:0 sequence=[commit(1)]" in out


class TestFigure:
    def test_all_match(self, capsys):
        code, out, _ = run_cli(capsys, "figure", "all")
        assert code == 0 and out.count("golden=match") == 3

    def test_diff_exit(self, capsys, monkeypatch):
        monkeypatch.setattr(cli.figures, "compare", lambda name: (False, "--- a\n+++ b\n"))
        code, out, _ = run_cli(capsys, "figure", "fig2")
        assert code == 1 and "golden=differ" in out and "+++ b" in out
