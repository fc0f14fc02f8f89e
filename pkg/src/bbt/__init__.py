"""World-aligned joint angles and movement-deviation scores from monocular
Box and Block Test recordings."""

__version__ = "0.1.0"
