import numpy as np
import pytest

from glyphforge.ocr import CharBox


def make_box(x0=0, y0=0, w=10, h=20, glyph="a", page=0, conf=95.0):
    return CharBox(page_index=page, glyph=glyph, x0=x0, y0=y0, width=w, height=h, confidence=conf)


def _canvas(h=14, w=14):
    return np.zeros((h, w), dtype=bool)


def glyph_shapes() -> list[np.ndarray]:
    """Ten thick asymmetric binary shapes (>= 60 ink pixels each)."""
    shapes = []

    s = _canvas()
    s[1:12, 2:6] = True   # L
    s[9:13, 2:12] = True
    shapes.append(s)

    s = _canvas()
    s[2:5, 1:13] = True   # T with a skewed stem
    s[5:13, 5:8] = True
    s[10:13, 8:10] = True
    shapes.append(s)

    s = _canvas()
    s[1:4, 2:12] = True   # S-ish zigzag
    s[4:8, 2:6] = True
    s[6:10, 6:11] = True
    s[10:13, 1:9] = True
    shapes.append(s)

    s = _canvas()
    for i in range(11):   # thick diagonal with a foot
        s[i + 1, i + 1 : i + 6] = True
    s[11:13, 1:8] = True
    shapes.append(s)

    s = _canvas()
    s[1:13, 2:5] = True   # P
    s[1:4, 5:11] = True
    s[4:7, 8:11] = True
    s[6:8, 5:11] = True
    shapes.append(s)

    s = _canvas()
    s[1:13, 2:5] = True   # h
    s[6:9, 5:10] = True
    s[8:13, 8:11] = True
    shapes.append(s)

    s = _canvas()
    for i in range(11):   # filled right triangle
        s[i + 1, 1 : 2 + i]= True
    shapes.append(s)

    s = _canvas()
    s[1:13, 3:6] = True   # r with hook
    s[1:5, 6:12] = True
    s[4:8, 9:12] = True
    shapes.append(s)

    s = _canvas()
    s[1:4, 8:13] = True   # offset dot over a bent bar
    s[4:13, 3:7] = True
    s[9:13, 7:11] = True
    shapes.append(s)

    s = _canvas()
    s[1:5, 1:6] = True    # staircase
    s[4:9, 4:9] = True
    s[7:12, 8:13] = True
    shapes.append(s)

    for s in shapes:
        assert s.sum() >= 60, s.sum()
    return shapes


@pytest.fixture(scope="session")
def shapes():
    return glyph_shapes()
