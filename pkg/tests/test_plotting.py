from celetrip.plotting import plot_metrics, plot_probabilities, plot_training_curves
from celetrip.train_eval import EpochRecord

PNG = b"\x89PNG\r\n\x1a\n"


def test_training_curves(tmp_path):
    hist = [EpochRecord(e, 1 / e, 50 + e, 1.2 / e, 40 + e) for e in range(1, 6)]
    out = plot_training_curves(hist, tmp_path / "c.png")
    assert out.read_bytes().startswith(PNG)
    again = plot_training_curves(hist, tmp_path / "d.png")
    assert out.read_bytes() == again.read_bytes()


def test_metrics_and_probabilities(tmp_path):
    reports = {"model": {"precision": 90, "recall": 80, "f1": 84.7, "accuracy": 95},
               "LocFre": {"precision": 40, "recall": 40, "f1": 40, "accuracy": 76}}
    assert plot_metrics(reports, tmp_path / "m.png", "held-out").read_bytes().startswith(PNG)
    assert plot_metrics({"only": reports["model"]}, tmp_path / "o.png").stat().st_size > 0
    p = plot_probabilities(["Philadelphia", "Washington D.C."], [0.91, 0.12], 0.5, tmp_path / "p.png", "trip")
    assert p.read_bytes().startswith(PNG)
