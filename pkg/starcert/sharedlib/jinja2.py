# Filename    : jinja2.py
# Description : Jinja2 environment and custom filters for the SVG figures

import re

import unidecode
from jinja2 import Environment, PackageLoader, select_autoescape

# Custom jinja2 filters
# ---------------------


def svg_points(points):
    """ (k, 2) coordinates to the "x,y x,y ..." form of a polygon/polyline points attribute """
    return ' '.join(f'{x:.3f},{y:.3f}' for x, y in points)


def fmt(value, digits=3):
    """ fixed-point number, or n/a for a missing value """
    if value is None:
        return 'n/a'
    return f'{value:.{digits}f}'


def make_slug(text):
    text = unidecode.unidecode(text).lower()
    return re.sub(r'[\W_]+', '-', text).strip('-')


def get_environment():
    env = Environment(
        loader=PackageLoader('starcert', 'templates'),
        autoescape=select_autoescape(enabled_extensions=('svg.j2',), default_for_string=True),
        trim_blocks=True,
        lstrip_blocks=True
    )
    env.filters['svg_points'] = svg_points
    env.filters['fmt'] = fmt
    env.filters['make_slug'] = make_slug
    return env


def render(template_name, **context):
    return get_environment().get_template(template_name).render(**context)
