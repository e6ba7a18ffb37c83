"""Two-school toy instance where minimum travel time costs a bus.

School ``K1`` dismisses at 0 with 60 students spread over ``s1``, ``s2``,
``s3`` (two trips needed at capacity 48); school ``K2`` dismisses at 20 with
10 students at ``s4``, which sits on the school itself.  With t = 10 minutes:

* O1 -> s1 is t, s1 -> s2 is t, O1 -> s2 is 2t (through s1), O1 -> s3 is 2t,
  s2 -> s3 is 2t, s1 -> s3 is 3t (through O1);
* s1 and s2 are both t away from O2.

Minimum travel time builds O1-s1-s2 and O1-s3 (4t, both finish at 2t and
reach O2 at 3t at the earliest).  Serving s1 alone and sending the other trip
through s1 to s2 and s3 costs 5t but reaches O2 exactly at its dismissal.
"""
from __future__ import annotations

from .instance import Instance, School, Stop, TravelTimeMatrix, to_ticks

T = 10  # minutes

_IDS = ("O1", "s1", "s2", "s3", "O2", "s4")
_MINUTES = (
    # O1   s1    s2    s3    O2    s4
    (0,    T,    2*T,  2*T,  2*T,  2*T),  # O1
    (T,    0,    T,    3*T,  T,    T),    # s1
    (2*T,  T,    0,    2*T,  T,    T),    # s2
    (2*T,  3*T,  2*T,  0,    3*T,  3*T),  # s3
    (2*T,  T,    T,    3*T,  0,    0),    # O2
    (2*T,  T,    T,    3*T,  0,    0),    # s4
)


def toy_instance() -> Instance:
    stops = tuple(Stop(sid) for sid in _IDS)
    rows = [[to_ticks(m) for m in row] for row in _MINUTES]
    schools = (
        School("K1", "O1", 0, {"s1": 20, "s2": 20, "s3": 20}),
        School("K2", "O2", to_ticks(2 * T), {"s4": 10}),
    )
    return Instance(stops, schools, TravelTimeMatrix(_IDS, rows), capacity=48)
