"""Sentence templates for the synthetic object-manipulation corpus.

Cue sentences encode the labeling criteria: N marks trajectors that are not
graspable objects at all (food, pictures, fixtures), M0 ones that are held,
moving or boxed in, M1 ones that are reachable only with care, M2 ones that
sit free on a clear surface.  Scene sentences are label-independent filler.
Bump ``TEMPLATE_VERSION`` whenever any list below changes.
"""

TEMPLATE_VERSION = 1

SYNSETS = (
    "apple.n.01",
    "ball.n.01",
    "bottle.n.01",
    "can.n.01",
    "cellular_telephone.n.01",
    "cup.n.01",
    "glass.n.01",
    "paper.n.01",
    "remote_control.n.01",
    "shoe.n.01",
    "teddy.n.01",
)

# Ordinary name expressions; '|' separates alternative candidates.
NAMES = {
    "apple.n.01": ("apple", "red apple", "green apple", "apples in bowl | bowl of apples"),
    "ball.n.01": ("ball", "tennis ball", "soccer ball", "baseball | white ball"),
    "bottle.n.01": ("bottle", "water bottle", "wine bottle", "plastic bottle | clear bottle"),
    "can.n.01": ("can", "soda can", "tin can", "cans in row | row of cans"),
    "cellular_telephone.n.01": ("cell phone", "phone | mobile phone", "smartphone", "black phone"),
    "cup.n.01": ("cup", "coffee cup", "cups in stack | stacked cups", "white mug | mug"),
    "glass.n.01": ("glass", "wine glass", "drinking glass", "empty glass | clear glass"),
    "paper.n.01": ("paper", "sheet of paper", "newspaper", "papers | stack of papers"),
    "remote_control.n.01": ("remote", "remote control | tv remote", "black remote", "controller"),
    "shoe.n.01": ("shoe", "sneaker", "shoes | pair of shoes", "brown shoe"),
    "teddy.n.01": ("teddy bear", "stuffed bear | teddy", "brown teddy bear", "toy bear"),
}

# Name expressions that fall under the synset but are not graspable objects.
ODD_NAMES = {
    "apple.n.01": ("apple logo | apple sticker", "apple slices in pie"),
    "ball.n.01": ("meat ball | meatballs", "ball of yarn on a cat"),
    "bottle.n.01": ("bottle on billboard", "bottle drawing"),
    "can.n.01": ("trash can | garbage can", "can painted on wall"),
    "cellular_telephone.n.01": ("phone on advertisement", "phone booth"),
    "cup.n.01": ("cup of soup", "cup shaped sign"),
    "glass.n.01": ("window glass | glass window", "glass door"),
    "paper.n.01": ("wallpaper | paper wall", "paper lantern on ceiling"),
    "remote_control.n.01": ("remote on poster", "remote drawing"),
    "shoe.n.01": ("shoe statue | giant shoe", "shoe print"),
    "teddy.n.01": ("teddy bear print", "teddy bear balloon"),
}

CUES = {
    "N": (
        "the {name} is part of a printed picture",
        "the {name} is food served on a plate",
        "the {name} is painted on a large wall",
        "a huge {name} shaped statue stands outside",
        "the {name} is drawn on a street sign",
        "the {name} appears on a television screen",
        "the {name} is a decoration fixed to the ceiling",
        "sauce covers the {name} on the dish",
    ),
    "M0": (
        "a man is holding the {name}",
        "the woman grips the {name} in her hand",
        "the {name} is flying through the air",
        "the {name} is surrounded by many obstacles",
        "a child is carrying the {name} away",
        "the {name} is rolling quickly across the field",
        "a dog holds the {name} in its mouth",
        "people crowd around the {name}",
        "the {name} is locked inside a glass case",
    ),
    "M1": (
        "the {name} is on a high shelf",
        "the {name} sits near the edge of the table",
        "the {name} is partly hidden behind a box",
        "the {name} lies among cluttered items",
        "the {name} is on the floor under the chair",
        "the {name} is leaning against the wall",
        "the {name} is wedged between two books",
        "the {name} is balanced on top of a pile",
    ),
    "M2": (
        "the {name} is on an empty table",
        "the {name} sits alone on the counter",
        "the {name} rests on a clear desk",
        "nothing blocks the {name}",
        "the {name} stands upright on a flat tray",
        "the {name} is placed in the middle of the table",
        "there is plenty of space around the {name}",
        "the {name} is easy to reach on the bench",
    ),
    "E1": (
        "several {name}s are piled in a basket",
        "many {name}s are lined up together",
        "a group of {name}s fills the box",
    ),
    "E2": (
        "only the handle of the {name} is visible",
        "just a corner of the {name} can be seen",
        "most of the {name} is cut off from view",
    ),
    "O": (
        "the {name} is barely visible in the dark",
        "the {name} is reflected in a mirror",
    ),
}

SCENE_TEMPLATES = (
    "a {color} {thing} on the {place}",
    "the {thing} is next to a {color} {thing2}",
    "{person} {action} in the {room}",
    "a {adj} {thing} near the {place}",
    "{color} {thing} behind the {thing2}",
    "the {room} has a {adj} {thing}",
    "{person} wearing a {color} {clothing}",
    "the {place} is {adj}",
    "sunlight comes through the {opening}",
    "a {adj} {thing2} in the background",
)

WORDS = {
    "color": (
        "red", "blue", "green", "white", "black", "yellow", "brown", "gray", "orange",
        "pink", "purple", "silver", "golden", "beige", "dark", "light",
    ),
    "thing": (
        "lamp", "chair", "sofa", "plant", "vase", "book", "picture", "clock", "pillow",
        "blanket", "rug", "curtain", "bag", "box", "basket", "towel", "bowl", "plate",
        "fork", "spoon", "knife", "napkin", "candle", "frame", "mirror", "speaker",
        "laptop", "keyboard", "monitor", "printer", "cable", "umbrella", "hat", "jacket",
        "bicycle", "stool", "bench", "cabinet", "drawer", "fan", "radio", "toy", "flower",
        "pot", "pan", "kettle", "jar", "tray", "sign", "poster",
    ),
    "thing2": (
        "window", "door", "wall", "fence", "tree", "car", "bus", "truck", "building",
        "table", "counter", "shelf", "sink", "stove", "fridge", "bed", "desk", "cupboard",
        "staircase", "railing", "pole", "fountain", "tent", "boat",
    ),
    "place": (
        "floor", "ground", "street", "sidewalk", "grass", "carpet", "tile", "corner",
        "porch", "balcony", "patio", "park", "beach", "yard", "garden", "road", "hallway",
    ),
    "room": ("kitchen", "living room", "bedroom", "office", "bathroom", "garage", "classroom", "restaurant", "cafe", "store"),
    "person": ("a man", "a woman", "a boy", "a girl", "an old man", "a young woman", "two people", "a player", "a chef", "a waiter"),
    "action": ("is standing", "is sitting", "is walking", "is talking", "is reading", "is cooking", "is smiling", "is waiting", "is working", "is laughing"),
    "adj": (
        "small", "large", "tall", "short", "wooden", "metal", "plastic", "old", "new",
        "round", "square", "shiny", "dirty", "clean", "bright", "striped", "soft", "heavy",
    ),
    "clothing": ("shirt", "dress", "coat", "sweater", "cap", "scarf", "skirt", "hoodie", "uniform", "apron"),
    "opening": ("window", "skylight", "doorway", "blinds", "curtains"),
}
