import pytest

from iotsentry.domain import Institution, NetworkProfile, Principal, Role
from iotsentry.firewall import SimulatedFirewall
from iotsentry.registry import DeviceRegistry
from iotsentry.storage import Storage

INST = "inst-1"
OTHER_INST = "inst-2"


def make_institution(inst_id=INST, ip_pool="192.168.1.0/24"):
    return Institution(
        inst_id,
        name=f"Campus {inst_id}",
        network_profile=NetworkProfile(endpoint="sim://local", ip_pool=ip_pool),
    )


@pytest.fixture
def admin():
    return Principal("admin", Role.ADMIN, frozenset({INST}))


@pytest.fixture
def regular():
    return Principal("alice", Role.REGULAR, frozenset({INST}))


@pytest.fixture
def superuser():
    return Principal("root", Role.SUPERUSER, frozenset({INST, OTHER_INST}))


class World:
    """Storage + simulated firewall + registry wired for one institution."""

    def __init__(self, ip_pool="192.168.1.0/24"):
        self.storage = Storage()
        self.fw = SimulatedFirewall()
        self.institution = make_institution(ip_pool=ip_pool)
        self.registry = DeviceRegistry(
            self.storage, {INST: self.institution}, {INST: self.fw}
        )
        self.admin = Principal("admin", Role.ADMIN, frozenset({INST}))

    def onboard(self, mac="aa:bb:cc:dd:ee:01", owner="alice", name="sensor", ip=None):
        user = Principal(owner, Role.REGULAR, frozenset({INST}))
        device = self.registry.request_access(user, mac, name)
        return self.registry.approve_device(self.admin, device.device_id, assigned_ip=ip)


@pytest.fixture
def world():
    return World()
