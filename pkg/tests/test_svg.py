import xml.etree.ElementTree as ET

import numpy as np

from bglsff.svg import Series, _linear_ticks, render_svg

NS = "{http://www.w3.org/2000/svg}"


def parse(svg):
    return ET.fromstring(svg)


def test_well_formed_and_deterministic():
    s = [Series(np.logspace(-1, 3, 20), np.logspace(0, -2, 20), "beta=0 gamma=0")]
    a, b = render_svg(s, title="panel"), render_svg(s, title="panel")
    assert a == b
    root = parse(a)
    assert root.tag == NS + "svg"
    assert len(root.findall(NS + "polyline")) == 1
    texts = [t.text for t in root.iter(NS + "text")]
    assert "panel" in texts and "beta=0 gamma=0" in texts and "1e-1" in texts and "1e3" in texts


def test_log_axes_drop_non_positive_points():
    s = [Series(np.array([0.0, 1.0, 10.0]), np.array([1.0, -1.0, 0.5]))]
    root = parse(render_svg(s))
    points = root.find(NS + "polyline").get("points").split()
    assert len(points) == 1


def test_points_lie_inside_plot_area():
    x = np.logspace(0, 4, 30)
    root = parse(render_svg([Series(x, 1 / x), Series(x, 1 / np.sqrt(x))], width=500, height=400))
    for line in root.findall(NS + "polyline"):
        xy = np.array([p.split(",") for p in line.get("points").split()], dtype=float)
        assert np.all((xy[:, 0] >= 70) & (xy[:, 0] <= 500 - 150))
        assert np.all((xy[:, 1] >= 40) & (xy[:, 1] <= 400 - 55))


def test_markers_and_linear_axes():
    s = [Series(np.array([0.0, 1.0, 2.0]), np.array([3.0, 1.0, 2.0]), "ratios", markers=True)]
    root = parse(render_svg(s, logx=False, logy=False))
    assert len(root.findall(NS + "circle")) == 3
    assert root.find(NS + "polyline") is None


def test_escaping_and_empty_input():
    root = parse(render_svg([Series(np.array([1.0]), np.array([1.0]), "a<b & c")], title="x < y"))
    assert "a<b & c" in [t.text for t in root.iter(NS + "text")]
    parse(render_svg([]))


def test_linear_ticks():
    assert _linear_ticks(0.0, 1.0) == [0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]
    assert _linear_ticks(2.0, 2.0) == [2.0]
