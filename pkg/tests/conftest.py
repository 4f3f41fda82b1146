import os

import numpy as np
import pytest

from fastbench import decart
from fastbench.model import parse_model

PENDULUM = """
<robot name="pendulum">
  <link name="base"/>
  <link name="arm">
    <inertial>
      <origin xyz="0 0 -1"/>
      <mass value="1.0"/>
      <inertia ixx="0" ixy="0" ixz="0" iyy="0" iyz="0" izz="0"/>
    </inertial>
  </link>
  <link name="tip"/>
  <joint name="swing" type="revolute">
    <parent link="base"/>
    <child link="arm"/>
    <axis xyz="0 1 0"/>
    <limit effort="50" velocity="20" lower="-3.2" upper="3.2"/>
  </joint>
  <joint name="tip_weld" type="fixed">
    <parent link="arm"/>
    <child link="tip"/>
    <origin xyz="0 0 -1"/>
  </joint>
</robot>
"""


def double_pendulum_xml(m1=1.3, m2=0.7, l1=0.9, l2=0.6, c1=0.45, c2=0.35, i1=0.02, i2=0.015, damping=0.0):
    """Planar double pendulum swinging in x-z about y; COMs on the links."""
    return f"""
<robot name="double_pendulum">
  <link name="base"/>
  <link name="upper">
    <inertial>
      <origin xyz="0 0 {-c1}"/>
      <mass value="{m1}"/>
      <inertia ixx="{i1}" ixy="0" ixz="0" iyy="{i1}" iyz="0" izz="0.001"/>
    </inertial>
  </link>
  <link name="lower">
    <inertial>
      <origin xyz="0 0 {-c2}"/>
      <mass value="{m2}"/>
      <inertia ixx="{i2}" ixy="0" ixz="0" iyy="{i2}" iyz="0" izz="0.001"/>
    </inertial>
  </link>
  <link name="tip"/>
  <joint name="shoulder" type="revolute">
    <parent link="base"/><child link="upper"/>
    <axis xyz="0 1 0"/>
    <limit effort="100" velocity="30" lower="-6" upper="6"/>
    <dynamics damping="{damping}"/>
  </joint>
  <joint name="elbow" type="revolute">
    <parent link="upper"/><child link="lower"/>
    <origin xyz="0 0 {-l1}"/>
    <axis xyz="0 1 0"/>
    <limit effort="100" velocity="30" lower="-6" upper="6"/>
    <dynamics damping="{damping}"/>
  </joint>
  <joint name="tip_weld" type="fixed">
    <parent link="lower"/><child link="tip"/>
    <origin xyz="0 0 {-l2}"/>
  </joint>
</robot>
"""


BRANCHED = """
<robot name="branched">
  <link name="base"/>
  <link name="a"><inertial><origin xyz="0.1 0 -0.2" rpy="0.1 0.2 0.3"/><mass value="1.1"/>
    <inertia ixx="0.03" ixy="0.001" ixz="0.002" iyy="0.025" iyz="0.0005" izz="0.02"/></inertial></link>
  <link name="b"><inertial><origin xyz="0 0.05 -0.1"/><mass value="0.6"/>
    <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.012" iyz="0" izz="0.008"/></inertial></link>
  <link name="c"><inertial><origin xyz="0.02 0 -0.15"/><mass value="0.4"/>
    <inertia ixx="0.004" ixy="0" ixz="0.0002" iyy="0.005" iyz="0" izz="0.003"/></inertial></link>
  <link name="d"><inertial><origin xyz="0 0 -0.05"/><mass value="0.3"/>
    <inertia ixx="0.002" ixy="0" ixz="0" iyy="0.002" iyz="0" izz="0.001"/></inertial></link>
  <link name="e"><inertial><origin xyz="0 0 0.05"/><mass value="0.2"/>
    <inertia ixx="0.001" ixy="0" ixz="0" iyy="0.001" iyz="0" izz="0.001"/></inertial></link>
  <joint name="j_a" type="revolute"><parent link="base"/><child link="a"/>
    <origin xyz="0 0 0.1" rpy="0.2 0 0.1"/><axis xyz="0 0 1"/>
    <limit effort="10" velocity="5" lower="-3" upper="3"/></joint>
  <joint name="j_b" type="revolute"><parent link="a"/><child link="b"/>
    <origin xyz="0.1 0 -0.3"/><axis xyz="0.6 0.8 0"/>
    <limit effort="10" velocity="5" lower="-3" upper="3"/></joint>
  <joint name="j_c" type="prismatic"><parent link="b"/><child link="c"/>
    <origin xyz="0 0 -0.2" rpy="0 0.3 0"/><axis xyz="0 0 1"/>
    <limit effort="50" velocity="1" lower="-0.2" upper="0.2"/></joint>
  <joint name="j_d" type="revolute"><parent link="a"/><child link="d"/>
    <origin xyz="-0.1 0.1 -0.2"/><axis xyz="1 0 0"/>
    <mimic joint="j_b" multiplier="-0.5" offset="0.1"/>
    <limit effort="10" velocity="5" lower="-3" upper="3"/></joint>
  <joint name="j_e" type="revolute"><parent link="c"/><child link="e"/>
    <origin xyz="0 0 -0.1" rpy="0.1 0.2 0.3"/><axis xyz="0 1 0"/>
    <limit effort="10" velocity="5" lower="-3" upper="3"/></joint>
</robot>
"""


@pytest.fixture(scope="session")
def pendulum():
    return parse_model(PENDULUM, foot_frame="tip")


@pytest.fixture(scope="session")
def double_pendulum():
    return parse_model(double_pendulum_xml(), foot_frame="tip")


@pytest.fixture(scope="session")
def branched():
    """Branched tree with a prismatic joint, a mimic joint and tilted frames."""
    return parse_model(BRANCHED, foot_frame="e")


@pytest.fixture(scope="session")
def decart_params():
    return decart.DecartLegParams()


@pytest.fixture(scope="session")
def decart_model(decart_params):
    return decart.load_variant(decart_params, "decoupled")


@pytest.fixture(scope="session")
def serial_model(decart_params):
    return decart.load_variant(decart_params, "serial")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(autouse=True)
def _serial_scan(monkeypatch):
    # keep scans single-process unless a test opts in
    monkeypatch.delenv("FASTBENCH_THREADS", raising=False)
    yield


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def pytest_configure(config):
    os.environ.setdefault("MPLBACKEND", "Agg")
