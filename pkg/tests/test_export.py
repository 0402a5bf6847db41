import json
import math

import numpy as np

from epsctl.ellipsoids import SetPolygon
from epsctl.export import comparison_csv, curve_csv, polygons_csv, to_json, trajectory_csv, write_output
from epsctl.models import ComparisonRow, InvarianceReport, SetKind
from epsctl.simulate import Trajectory


def test_json_rounds_and_drops_non_finite():
    report = InvarianceReport(max_v=math.inf, first_entry_time=1.0 / 3.0, entered=False, monotone=True)
    data = json.loads(to_json(report))
    assert "max_v" not in data
    assert data["first_entry_time"] == 0.333333333333
    assert data["entered"] is False


def test_curve_csv_header_and_line_endings():
    text = curve_csv([(0.5, 1.25), (1.0, 2.0)])
    assert text.startswith("alpha,eps_alpha\n")
    assert "\r" not in text
    assert text.splitlines()[1] == "0.5,1.25"


def test_polygons_are_labelled():
    square = SetPolygon(SetKind.REACH_INF, np.array([[1.0, 0.0], [0.0, 1.0]]), horizon=5.0)
    text = polygons_csv([square])
    lines = text.splitlines()
    assert lines[0] == "kind,index,x1,x2"
    assert lines[1].startswith(f"{SetKind.REACH_INF},0,")


def test_trajectory_columns():
    traj = Trajectory(
        times=np.array([0.0, 0.1]),
        states=np.zeros((2, 2)),
        outputs=np.zeros((2, 1)),
        v_values=np.array([0.0, 0.01]),
    )
    assert trajectory_csv(traj).splitlines()[0] == "t,x1,x2,z1,v"


def test_comparison_rows_flatten_gains():
    row = ComparisonRow(beta=-1.0, alpha_hat=0.43, k=[[-0.81, -1.85]], l=[[-1.85], [-0.81]], eps_norm=6.62)
    lines = comparison_csv([row]).splitlines()
    assert lines[0] == "beta,alpha_hat,k1,k2,l1,l2,eps_norm,boundary_flag"
    assert lines[1] == "-1,0.43,-0.81,-1.85,-1.85,-0.81,6.62,false"


def test_write_output_uses_lf(tmp_path):
    path = tmp_path / "out.csv"
    write_output("a,b\n1,2\n", str(path))
    assert path.read_bytes() == b"a,b\n1,2\n"
