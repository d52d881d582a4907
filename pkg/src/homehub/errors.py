"""Typed hub errors. Every error carries the wire ERR code it maps to."""


class HubError(Exception):
    code = "EPARSE"

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message


# registry / device state
class DuplicateName(HubError):
    code = "ESTATE"


class InvalidStateForKind(HubError):
    code = "EVERB"


class UnknownDevice(HubError):
    code = "ETARGET"


class IllegalVerb(HubError):
    code = "EVERB"


# grammar
class EmptyInput(HubError):
    code = "EPARSE"


class UnknownVerb(HubError):
    code = "EVERB"


class UnknownTarget(HubError):
    code = "ETARGET"


class AmbiguousTarget(HubError):
    code = "ETARGET"

    def __init__(self, candidates):
        self.candidates = list(candidates)
        super().__init__("ambiguous target: " + ", ".join(self.candidates))


class BadCompactForm(HubError):
    code = "EPARSE"


class UnknownAlias(HubError):
    code = "ETARGET"


class BadLevel(HubError):
    code = "EPARSE"


# security
class BadNumber(HubError):
    code = "EPARSE"


class NotConfigured(HubError):
    code = "ECONF"


class AlreadyScanning(HubError):
    code = "ESTATE"


class NotScanning(HubError):
    code = "ESTATE"


class UnknownBeam(HubError):
    code = "ETARGET"


class GatewayDown(HubError):
    # recorded in the alert, never fatal and never a wire response
    code = "ESTATE"


# surveillance
class UnknownCamera(HubError):
    code = "ETARGET"


class NoFrameYet(HubError):
    code = "ESTATE"


class StreamBusy(HubError):
    code = "EBUSY"


# automation
class UnknownAsset(HubError):
    code = "ETARGET"


class BadCoordinates(HubError):
    code = "EPARSE"


class UnknownGate(HubError):
    code = "ETARGET"


# remote desktop
class BadViewport(HubError):
    code = "EPARSE"


class UnknownCommand(HubError):
    code = "EUNKNOWNCMD"


class Denied(HubError):
    code = "EDENIED"


class DesktopUnavailable(HubError):
    code = "EUNAVAILABLE"


# virtual mobile
class BadOp(HubError):
    code = "EPARSE"


class PhoneUnreachable(HubError):
    code = "ETARGET"


class AlreadyPaired(HubError):
    code = "EBUSY"


class NotPaired(HubError):
    code = "ESTATE"


class PairRejected(HubError):
    code = "EREJECTED"


class BusyCall(HubError):
    code = "EBUSY"


class UnknownContact(HubError):
    code = "ETARGET"


class LinkLost(HubError):
    code = "ELINK"


# hubd
class AuthRequired(HubError):
    code = "EAUTH"


class ConfigError(HubError):
    code = "ECONF"


class BindFailure(HubError):
    code = "ECONF"


class CorruptLog(HubError):
    code = "ESTATE"
