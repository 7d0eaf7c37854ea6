"""Small hand-checkable datasets used by the tests and the CLI examples."""
from __future__ import annotations

from .store import AtomInt, AtomStr, Collection, Complex, Reference, Store


def _leaf(store, parent, name, value):
    payload = AtomInt(value) if isinstance(value, int) else AtomStr(value)
    return store.insert_object(parent, name, payload)


def seed_store(course_links: bool = False) -> Store:
    """University sample: Student, course and Faculty classes.

    Each student has ``fName``, ``lName``, ``marks``, an ``address`` with
    ``city``/``street``/``house`` and one ``learns`` link per course taken.
    Each course has a ``name`` and a ``faculty`` link. With ``course_links``
    every student also carries ``course`` references, which shadow the
    ``course`` class inside a student's scope.
    """
    s = Store()
    faculties = {}
    for name in ("Computing", "Engineering"):
        f = s.insert_object(None, "Faculty", Complex())
        _leaf(s, f, "name", name)
        faculties[name] = f

    courses = {}
    for name, faculty in (("Databases", "Computing"), ("Networks", "Engineering")):
        c = s.insert_object(None, "course", Complex())
        _leaf(s, c, "name", name)
        s.insert_object(c, "faculty", Reference(faculties[faculty]))
        courses[name] = c

    students = [
        ("Ali", "Hassan", 150, "Jeddah", ["Networks"]),
        ("Sara", "Mansour", 250, "Rabigh", ["Databases"]),
        ("Omar", "Khalid", 300, "Jeddah", ["Databases", "Networks"]),
    ]
    for house, (fname, lname, marks, city, learns) in enumerate(students, start=1):
        st = s.insert_object(None, "Student", Complex())
        _leaf(s, st, "fName", fname)
        _leaf(s, st, "lName", lname)
        _leaf(s, st, "marks", marks)
        addr = s.insert_object(st, "address", Complex())
        _leaf(s, addr, "city", city)
        _leaf(s, addr, "street", "King Abdulaziz Rd")
        _leaf(s, addr, "house", house)
        for course in learns:
            s.insert_object(st, "learns", Reference(courses[course]))
            if course_links:
                s.insert_object(st, "course", Reference(courses[course]))
    return s


def equijoin_store() -> Store:
    """Student/Course classes joinable on collection attributes.

    ``Student.codes``/``Course.prereq`` are int sets; ``Student.tags``/
    ``Course.needs`` are string lists whose matches differ between seq and
    bag mode.
    """
    s = Store()
    students = [
        ("Ali", 150, [1, 2], ["db", "net"]),
        ("Sara", 250, [2, 1], ["net", "db"]),
        ("Omar", 300, [3], ["db"]),
        ("Lina", 220, [], []),
    ]
    for fname, marks, codes, tags in students:
        st = s.insert_object(None, "Student", Complex())
        _leaf(s, st, "fName", fname)
        _leaf(s, st, "marks", marks)
        s.insert_object(st, "codes", Collection("set", tuple(codes)))
        s.insert_object(st, "tags", Collection("list", tuple(tags)))
    courses = [
        ("Databases", [1, 2], ["db", "net"]),
        ("Networks", [3], ["net", "db"]),
        ("Seminar", [], []),
        ("Compilers", [1, 2, 3], ["db"]),
    ]
    for name, prereq, needs in courses:
        c = s.insert_object(None, "Course", Complex())
        _leaf(s, c, "name", name)
        s.insert_object(c, "prereq", Collection("set", tuple(prereq)))
        s.insert_object(c, "needs", Collection("list", tuple(needs)))
    return s
