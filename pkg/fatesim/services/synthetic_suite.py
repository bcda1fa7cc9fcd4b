"""
Generators for the four synthetic apps (Player, Social, Bank, Market) and
the preset matrix of string-pool sizes and dummy-button augmentations.

Every model is built as a JSON-schema document and loaded through
`load_model`, so generated apps pass the same checks as hand-written ones.
"""

import string
from collections import deque
from functools import lru_cache
from typing import Any, Callable, Dict, Iterable, List, Optional, Set, Tuple

import numpy as np
from loguru import logger
from pydantic import ValidationError

from fatesim.model.app_model import EXTERNAL, AppModel, TransitionKind
from fatesim.model.suite_model import APPS, AppInfo, Preset, SuiteConfig
from fatesim.services.guard_lang import exec_set
from fatesim.services.model_service import enabled_transitions, load_model
from fatesim.utils.errors import ConfigError

USERNAME = "alice"
SOCIAL_PASSWORD = "s3cret"
BANK_PASSWORD = "b4nkpass"
BANK_PIN = "7319"
MARKET_USERNAME = "bob"
MARKET_PASSWORD = "m4rket"

SOCIAL_SCREENS = (
    "login", "main_act",
    "friends", "friend_detail", "friend_photos", "photo_viewer",
    "messages", "chat", "chat_media", "media_viewer",
    "settings", "privacy", "blocked_users", "about",
    "profile", "edit_profile", "change_avatar", "crop_avatar",
)

_FILLER_ALPHABET = list(string.ascii_lowercase + string.digits)


class _AppBuilder:
    """Accumulates nodes and transitions in JSON-schema form."""

    def __init__(self):
        self.nodes: Dict[str, Dict[str, Any]] = {}
        self.global_vars: List[Dict[str, Any]] = []

    def var(self, name: str, value):
        self.global_vars.append({"name": name, "value": value})

    def node(self, node_id: str, **flags) -> "_AppBuilder":
        self.nodes[node_id] = {"node_id": node_id, "transitions": [], **flags}
        return self

    def add(
        self,
        source: str,
        destination: str,
        kind: TransitionKind = TransitionKind.BUTTON,
        guard: Optional[str] = None,
        assign: Optional[List[str]] = None,
        alt: Optional[str] = None,
        crash: bool = False,
    ):
        transitions = self.nodes[source]["transitions"]
        transition: Dict[str, Any] = {
            "transition_id": len(transitions),
            "type": kind.value,
            "destination": destination,
        }
        if guard is not None:
            transition["guard"] = guard
        if assign:
            transition["set"] = assign
        if alt is not None:
            transition["alt_destination"] = alt
        if crash:
            transition["crash"] = True
        transitions.append(transition)

    def text_field(self, source: str, variable: str):
        self.add(source, source, TransitionKind.TEXT_FIELD, assign=[f"{variable} = __input__"])

    def dummy_buttons(self, source: str, count: int):
        for _ in range(count):
            self.add(source, source)

    def build(self, initial: str, pool: List[str]) -> AppModel:
        nodes = list(self.nodes.values())
        document = {
            "global_vars": self.global_vars,
            "nodes": nodes,
            "initial_node": initial,
            "string_pool": pool,
            "max_widget_slots": max(len(node["transitions"]) for node in nodes),
        }
        return load_model(document)


def string_pool(credentials: List[str], size: int, seed: int) -> List[str]:
    """Credentials plus distinct seeded filler strings, shuffled, exactly `size` long."""
    rng = np.random.default_rng(seed)
    pool = list(dict.fromkeys(credentials))
    taken = set(pool)
    while len(pool) < size:
        candidate = "".join(rng.choice(_FILLER_ALPHABET, size=int(rng.integers(4, 9))))
        if candidate not in taken:
            taken.add(candidate)
            pool.append(candidate)
    order = rng.permutation(len(pool))
    return [pool[i] for i in order]


def _login(app: _AppBuilder, node: str, success: str, password_var: str, dummies: int,
           on_success: Optional[List[str]] = None, forgot_guard: Optional[str] = None):
    app.text_field(node, "user_name")
    app.text_field(node, "user_pass")
    app.add(node, success, guard=f"user_pass == {password_var}", assign=on_success)
    app.add(node, EXTERNAL, guard=forgot_guard)  # forgot password opens the browser
    app.dummy_buttons(node, dummies)


def _player(config: SuiteConfig) -> Tuple[_AppBuilder, str]:
    app = _AppBuilder()
    app.var("volume", 5)

    root = "home"
    levels = [[root]]
    app.node(root)
    for _ in range(config.depth - 1):
        children = []
        for parent in levels[-1]:
            for k in range(config.branching):
                child = f"{parent}_{k}"
                app.node(child)
                app.add(parent, child)
                app.add(child, parent)
                children.append(child)
        levels.append(children)

    app.node("now_playing")
    app.add(root, "now_playing")
    app.add("now_playing", root)
    app.add("now_playing", "now_playing", TransitionKind.SCROLL, assign=["volume = volume + 1"], alt="now_playing")
    if config.depth > 1:
        for leaf in levels[-1]:
            app.add(leaf, "now_playing", TransitionKind.LONG_BUTTON)
    return app, root


def _social(config: SuiteConfig) -> Tuple[_AppBuilder, str]:
    app = _AppBuilder()
    for name, value in [("user_name", ""), ("user_pass", ""), ("real_pass", SOCIAL_PASSWORD),
                        ("draft", ""), ("count_messages", 0)]:
        app.var(name, value)
    for node in SOCIAL_SCREENS:
        app.node(node)

    _login(app, "login", "main_act", "real_pass", config.dummy_buttons, forgot_guard="internet_on == 1")

    app.add("main_act", "friends")
    app.add("main_act", "messages")
    app.add("main_act", "settings")
    app.add("main_act", "profile")
    app.add("main_act", "login", assign=['user_pass = ""'])

    app.add("friends", "main_act")
    app.add("friends", "friend_detail")
    app.add("friends", "friends", TransitionKind.SCROLL, alt="friends")
    app.add("friends", "friends", guard="internet_on == 1")  # pull to refresh
    app.add("friend_detail", "friends")
    app.add("friend_detail", "friend_photos")
    app.add("friend_detail", "messages")
    app.add("friend_photos", "friend_detail")
    app.add("friend_photos", "photo_viewer", guard="internet_on == 1")
    app.add("friend_photos", "friend_photos", TransitionKind.SCROLL, alt="friend_photos")
    app.add("photo_viewer", "friend_photos")
    app.add("photo_viewer", "main_act")
    app.add("photo_viewer", "photo_viewer", guard="rotated == 1")  # full screen

    app.text_field("messages", "draft")
    app.add("messages", "messages", assign=["count_messages = count_messages + 1"])
    app.add("messages", "chat", guard="count_messages >= 1")
    app.add("messages", "main_act")
    app.add("chat", "messages")
    app.add("chat", "messages", TransitionKind.LONG_BUTTON, assign=["count_messages = 0"])
    app.add("chat", "chat_media", guard="internet_on == 1")
    app.add("chat_media", "chat")
    app.add("chat_media", "media_viewer")
    app.add("chat_media", "chat_media", guard="rotated == 1")
    app.add("media_viewer", "chat_media")
    app.add("media_viewer", "main_act")

    app.add("settings", "main_act")
    app.add("settings", "privacy")
    app.add("settings", "settings", guard="internet_on == 0", crash=True)  # clear cache while offline
    app.add("settings", "about")
    app.add("privacy", "settings")
    app.add("privacy", "blocked_users", guard="rotated == 0")
    app.add("privacy", "privacy", guard="internet_on == 1")
    app.add("blocked_users", "privacy")
    app.add("blocked_users", "main_act")
    app.add("about", "settings")
    app.add("about", EXTERNAL)

    app.add("profile", "main_act")
    app.add("profile", "edit_profile", guard="rotated == 0")
    app.add("edit_profile", "profile")
    app.add("edit_profile", "change_avatar", guard="internet_on == 1")
    app.add("change_avatar", "edit_profile")
    app.add("change_avatar", "crop_avatar")
    app.add("change_avatar", "main_act")
    app.add("crop_avatar", "change_avatar")
    app.add("crop_avatar", "main_act")
    app.add("crop_avatar", "crop_avatar", guard="rotated == 1")
    return app, "login"


def _bank(config: SuiteConfig) -> Tuple[_AppBuilder, str]:
    app = _AppBuilder()
    for name, value in [("user_name", ""), ("user_pass", ""), ("real_pass", BANK_PASSWORD),
                        ("pin", ""), ("real_pin", BANK_PIN), ("amount", ""), ("transfers", 0)]:
        app.var(name, value)
    for node in ["login", "accounts", "balance", "transfer_auth", "transfer_form",
                 "transfer_done", "statements", "bank_settings"]:
        app.node(node)

    _login(app, "login", "accounts", "real_pass", config.dummy_buttons)

    app.add("accounts", "balance")
    app.add("accounts", "transfer_auth")
    app.add("accounts", "statements", guard="transfers >= 1")
    app.add("accounts", "bank_settings")
    app.add("accounts", "login", assign=['user_pass = ""', 'pin = ""'])

    app.add("balance", "accounts")
    app.add("balance", "balance", TransitionKind.SCROLL, alt="balance")

    app.text_field("transfer_auth", "pin")
    app.add("transfer_auth", "transfer_form", guard="pin == real_pin")
    app.add("transfer_auth", "accounts")

    app.text_field("transfer_form", "amount")
    app.add("transfer_form", "transfer_done", guard='amount != ""', assign=["transfers = transfers + 1"])
    app.add("transfer_form", "accounts")
    app.add("transfer_done", "accounts")

    app.add("statements", "accounts")
    app.add("statements", "statements", guard="internet_on == 0", crash=True)  # export while offline
    app.add("bank_settings", "accounts")
    app.add("bank_settings", EXTERNAL)
    return app, "login"


def _market(config: SuiteConfig) -> Tuple[_AppBuilder, str]:
    app = _AppBuilder()
    for name, value in [("user_name", ""), ("user_pass", ""), ("real_pass", MARKET_PASSWORD),
                        ("query", ""), ("cart_items", 0), ("logged_in", 0), ("orders_count", 0)]:
        app.var(name, value)
    for node in ["home", "search", "results", "product", "cart", "market_login",
                 "checkout", "order_done", "orders"]:
        app.node(node)

    app.add("home", "search")
    app.add("home", "cart")
    app.add("home", "market_login")
    app.add("home", "orders", guard="logged_in == 1")

    app.text_field("search", "query")
    app.add("search", "results", guard='query != ""')
    app.add("search", "home")

    app.add("results", "product")
    app.add("results", "results", TransitionKind.SCROLL, alt="results")
    app.add("results", "search")

    app.add("product", "product", assign=["cart_items = cart_items + 1"])
    app.add("product", "cart")
    app.add("product", "results")

    app.add("cart", "checkout", guard="cart_items >= 1 and logged_in == 1")
    app.add("cart", "home")
    app.add("cart", "cart", TransitionKind.LONG_BUTTON, assign=["cart_items = 0"])

    _login(app, "market_login", "home", "real_pass", config.dummy_buttons, on_success=["logged_in = 1"])
    app.add("market_login", "home")

    app.add("checkout", "order_done", assign=["orders_count = orders_count + 1", "cart_items = 0"])
    app.add("checkout", "cart")
    app.add("order_done", "orders")
    app.add("order_done", "home")
    app.add("orders", "home")
    app.add("orders", "orders", guard="internet_on == 0", crash=True)  # track order while offline
    return app, "home"


_GENERATORS: Dict[str, Callable[[SuiteConfig], Tuple[_AppBuilder, str]]] = {
    "player": _player,
    "social": _social,
    "bank": _bank,
    "market": _market,
}

_APP_INFO: Dict[str, AppInfo] = {
    "player": AppInfo(app="player", login_nodes=[], credentials=[], gated_nodes=[]),
    "social": AppInfo(
        app="social", login_nodes=["login"], credentials=[USERNAME, SOCIAL_PASSWORD],
        gated_nodes=list(SOCIAL_SCREENS[1:]),
    ),
    "bank": AppInfo(
        app="bank", login_nodes=["login"], credentials=[USERNAME, BANK_PASSWORD, BANK_PIN],
        gated_nodes=["accounts", "balance", "transfer_auth", "transfer_form",
                     "transfer_done", "statements", "bank_settings"],
    ),
    # Browsing and the cart stay open to guests, so coverage plateaus below 100% without the login.
    "market": AppInfo(
        app="market", login_nodes=["market_login"], credentials=[MARKET_USERNAME, MARKET_PASSWORD],
        gated_nodes=["checkout", "order_done", "orders"],
    ),
}


def app_info(app: str) -> AppInfo:
    return _APP_INFO[app]


def generate(config: SuiteConfig) -> AppModel:
    builder, initial = _GENERATORS[config.app](config)
    pool = string_pool(app_info(config.app).credentials, config.string_pool_size, config.seed)
    model = builder.build(initial, pool)
    logger.debug(f"Generated {config.app}: {len(model.nodes)} nodes, pool of {len(pool)}")
    return model


def suite_config(**fields) -> SuiteConfig:
    try:
        return SuiteConfig(**fields)
    except ValidationError as e:
        error = e.errors()[0]
        raise ConfigError(f"Invalid suite setting '{'.'.join(map(str, error['loc']))}': {error['msg']}")


_VARIANTS: Dict[str, Dict[str, int]] = {
    "20_str": {"string_pool_size": 20},
    "40_str": {"string_pool_size": 40},
    "80_str": {"string_pool_size": 80},
    "aug_5": {"string_pool_size": 20, "dummy_buttons": 5},
    "aug_10": {"string_pool_size": 20, "dummy_buttons": 10},
}


@lru_cache
def list_presets() -> Tuple[Preset, ...]:
    presets = []
    for app in APPS:
        variants = ["20_str"] if app == "player" else list(_VARIANTS)
        for variant in variants:
            presets.append(Preset(name=f"{app}/{variant}", config=SuiteConfig(app=app, **_VARIANTS[variant])))
    return tuple(presets)


def get_preset(name: str) -> Preset:
    for preset in list_presets():
        if preset.name == name:
            return preset
    raise ConfigError(f"Unknown preset '{name}'")


def reachable_nodes(
    model: AppModel, strings: Iterable[str], max_states: int = 50_000
) -> Set[str]:
    """
    Nodes reachable by exhaustive breadth-first search over concrete
    (node, variables) states, typing only `strings` into text fields.
    Crashes end a path, though an entered crash node still counts as
    reached; leaving the app returns to the source node.
    """
    strings = list(strings)
    start = (model.initial_node, tuple(sorted(model.initial_vars().items())))
    seen = {start}
    queue = deque([start])
    nodes = {model.initial_node}
    everything = set(model.app_nodes)
    while queue and len(seen) < max_states and not everything <= nodes:
        node, frozen = queue.popleft()
        variables = dict(frozen)
        successors = []
        for name in ("internet_on", "rotated"):
            toggled = dict(variables)
            toggled[name] = 1 - int(toggled[name])
            successors.append((node, toggled))
        for transition in enabled_transitions(model, node, variables):
            inputs = strings if transition.kind == TransitionKind.TEXT_FIELD else [None]
            for text in inputs:
                updated = exec_set(list(transition.set_exprs), variables, text)
                for mode in (0, 1):
                    destination = transition.target(mode)
                    if model.has_node(destination) and model.node(destination).crash_node:
                        nodes.add(destination)
                        continue
                    if transition.crash:
                        continue
                    successors.append((node if model.is_external(destination) else destination, updated))
        for next_node, next_vars in successors:
            state = (next_node, tuple(sorted(next_vars.items())))
            if state not in seen:
                seen.add(state)
                nodes.add(next_node)
                queue.append(state)
    return nodes
