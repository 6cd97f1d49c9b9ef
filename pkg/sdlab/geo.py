# -*- coding: utf-8 -*-
"""
Government response index series and distances from Wuhan

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

from dataclasses import dataclass, field
import datetime
import io
import math
import os

import numpy as np
import pandas as pd

from .core import (DegenerateInputError, EmptyRangeError,
                   MissingColumnsError, ValidationError, warn)
from .utils import debug


EARTH_RADIUS_KM = 6371.0
REQUIRED_COLUMNS = ('RegionName', 'Date', 'GovernmentResponseIndex')
CITIES_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                           'data', 'cities.csv')

WINDOW_2020 = (datetime.date(2020, 1, 23), datetime.date(2020, 5, 2))
WINDOW_2021 = (datetime.date(2020, 1, 23), datetime.date(2021, 5, 2))


@dataclass(frozen=True)
class GeoPoint(object):
    lat: float
    lon: float

    def __post_init__(self):
        if not -90 <= self.lat <= 90:
            raise ValidationError('latitude %r out of range' % (self.lat,))
        if not -180 <= self.lon <= 180:
            raise ValidationError('longitude %r out of range' % (self.lon,))


WUHAN = GeoPoint(30.5928, 114.3055)


@dataclass(frozen=True)
class IndexSeries(object):
    """
    Daily index of one region; missing observations are NaN
    """
    region: str
    dates: tuple
    values: tuple

    def __post_init__(self):
        if len(self.dates) != len(self.values):
            raise ValidationError('dates and values differ in length')
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValidationError('dates of %s are not strictly increasing' %
                                  self.region)

    def __len__(self):
        return len(self.dates)

    def to_series(self):
        return pd.Series(self.values, index=pd.DatetimeIndex(self.dates),
                         name=self.region)


@dataclass
class ParseReport(object):
    """
    Parsed series by region plus the rejected rows

    ``rejected`` holds ``(line, reason)`` pairs, ``line`` counting the
    header as line 1.
    """
    series: dict = field(default_factory=dict)
    rejected: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.series.values())

    def __len__(self):
        return len(self.series)

    def __getitem__(self, region):
        return self.series[region]


def _to_date(value):
    if isinstance(value, datetime.datetime):
        return value.date()
    if isinstance(value, datetime.date):
        return value
    if isinstance(value, pd.Timestamp):
        return value.date()
    return datetime.datetime.strptime(str(value), '%Y%m%d').date()


def parse_oxcgrt(text):
    """
    Parse index rows into one series per region

    Rows without a region fall back to ``CountryName`` when the column is
    present (national rows of the tracker). Empty index cells are kept as
    missing. Rows with an invalid date, a non-numeric index, an index
    outside [0, 100] or a repeated date are rejected; the first row of a
    date wins.
    """
    frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise MissingColumnsError('index file lacks columns: %s' %
                                  ', '.join(missing))
    report = ParseReport()
    collected = {}
    for offset, row in enumerate(frame.to_dict('records')):
        line = offset + 2
        region = row['RegionName'].strip()
        if not region and 'CountryName' in row:
            region = row['CountryName'].strip()
        if not region:
            report.rejected.append((line, 'no region'))
            continue
        try:
            date = _to_date(row['Date'].strip())
        except ValueError:
            report.rejected.append((line, 'invalid date %r' % row['Date']))
            continue
        raw = row['GovernmentResponseIndex'].strip()
        if raw == '':
            value = float('nan')
        else:
            try:
                value = float(raw)
            except ValueError:
                report.rejected.append((line, 'invalid index %r' % raw))
                continue
            if not 0 <= value <= 100:
                report.rejected.append((line, 'index %r outside [0, 100]' %
                                        value))
                continue
        days = collected.setdefault(region, {})
        if date in days:
            report.rejected.append((line, 'duplicate date %s for %s' % (
                date.isoformat(), region)))
            continue
        days[date] = value
    for region in sorted(collected):
        days = collected[region]
        dates = tuple(sorted(days))
        report.series[region] = IndexSeries(
            region, dates, tuple(days[d] for d in dates))
    if report.rejected:
        warn('%d index rows rejected, first at line %d: %s' % (
            len(report.rejected), report.rejected[0][0],
            report.rejected[0][1]))
    debug('parsed', len(report.series), 'regions')
    return report


def read_oxcgrt(path):
    with io.open(path, 'r', encoding='UTF-8') as fh:
        return parse_oxcgrt(fh.read())


def average_index(series, start, end):
    """
    Mean index over the available observations with ``start <= date <= end``

    >>> s = IndexSeries('X', (datetime.date(2020, 1, 1),
    ...                       datetime.date(2020, 1, 2)), (60.0, 80.0))
    >>> average_index(s, '20200101', '20200131')
    70.0
    """
    start, end = _to_date(start), _to_date(end)
    if start > end:
        raise ValidationError('start %s is after end %s' % (start, end))
    values = [v for d, v in zip(series.dates, series.values)
              if start <= d <= end and not math.isnan(v)]
    if not values:
        raise EmptyRangeError('no observation of %s between %s and %s' % (
            series.region, start, end))
    return float(np.mean(values))


def province_index_table(series, start, end):
    """
    Average index per region; regions without data in range are omitted
    """
    if isinstance(series, dict):
        series = series.values()
    rows = []
    for item in series:
        try:
            value = average_index(item, start, end)
        except EmptyRangeError as e:
            warn(str(e))
            continue
        observed = sum(1 for d, v in zip(item.dates, item.values)
                       if _to_date(start) <= d <= _to_date(end) and
                       not math.isnan(v))
        rows.append({'region': item.region, 'average_index': value,
                     'observations': observed})
    return pd.DataFrame(rows, columns=['region', 'average_index',
                                       'observations'])


def haversine_km(a, b, radius=EARTH_RADIUS_KM):
    """
    Great-circle distance in kilometres

    >>> round(haversine_km(GeoPoint(0, 0), GeoPoint(0, 180)), 1)
    20015.1
    """
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    h = math.sin((lat2 - lat1) / 2) ** 2 + \
        math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * radius * math.asin(min(1.0, math.sqrt(h)))


def pearson(x, y):
    """
    Sample correlation coefficient

    >>> pearson([1, 2, 3], [3, 5, 7])
    1.0
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError('pearson needs two sequences of equal length')
    if len(x) < 2:
        raise DegenerateInputError('pearson needs at least two points')
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DegenerateInputError('pearson needs nonzero variances')
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def load_cities(path=None):
    """
    City reference table with a ``distance`` column in 100's of km
    """
    frame = pd.read_csv(path or CITIES_PATH, comment='#')
    missing = [c for c in ('name', 'lat', 'lon', 'province', 'hubei')
               if c not in frame.columns]
    if missing:
        raise MissingColumnsError('city table lacks columns: %s' %
                                  ', '.join(missing))
    frame['distance'] = [
        haversine_km(WUHAN, GeoPoint(lat, lon)) / 100.0
        for lat, lon in zip(frame['lat'], frame['lon'])]
    return frame


def city_point(name, cities=None):
    cities = load_cities() if cities is None else cities
    match = cities[cities['name'].str.lower() == str(name).lower()]
    if match.empty:
        raise ValidationError('unknown city %r' % (name,))
    row = match.iloc[0]
    return GeoPoint(float(row['lat']), float(row['lon']))


def distance_from_wuhan(city, cities=None):
    """
    Distance of a city name or :class:`GeoPoint` from Wuhan, 100's of km
    """
    point = city if isinstance(city, GeoPoint) else city_point(city, cities)
    return haversine_km(WUHAN, point) / 100.0
