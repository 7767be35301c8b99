"""Generate caption-style raw sentences for building the tagger training corpus.

The sentences only need to be plausible English in the caption register; the
reference parser supplies the tags, so template mistakes do not leak into the
gold labels.

Usage: python gen_sentences.py OUTPUT.txt [--count N] [--seed S]
"""

import argparse
import random

NOUNS = """
dog cat horse cow sheep goat pig chicken duck goose bird parrot owl eagle pigeon
elephant giraffe zebra lion tiger bear monkey deer fox rabbit squirrel mouse frog
fish shark whale dolphin turtle snake butterfly bee spider man woman boy girl child
baby person lady gentleman player chef waiter teacher student doctor nurse farmer
soldier police officer driver pilot artist musician singer dancer worker tourist
couple family crowd group team friend mother father son daughter grandmother
car truck bus train bicycle bike motorcycle scooter boat ship airplane plane
helicopter tractor van taxi cab skateboard surfboard snowboard ski kite frisbee
ball bat racket racquet glove helmet umbrella backpack bag suitcase purse wallet
hat cap shirt jacket coat dress skirt jeans shoe boot sock scarf tie watch
necklace ring glasses sunglasses table chair couch sofa bed desk shelf lamp
clock mirror window door wall floor ceiling roof stairs fence gate bench
kitchen bathroom bedroom office room hallway garage garden yard park street road
sidewalk highway bridge river lake ocean sea beach mountain hill valley forest
tree flower grass leaf rock stone field farm city town village building house
tower church castle station airport market shop store restaurant cafe bar
hotel school hospital museum library stadium pool playground plate bowl cup mug
glass bottle jar spoon fork knife napkin tray pan pot oven stove sink
refrigerator microwave toaster kettle pizza sandwich burger hamburger salad soup
cake cookie bread cheese egg apple banana orange lemon strawberry grape carrot
broccoli tomato potato onion rice pasta meat chicken steak fish coffee tea milk
juice wine beer water ice snow rain sky cloud sun moon star sunset sunrise night
morning evening day light shadow fire smoke computer laptop keyboard monitor
phone smartphone camera television screen remote book magazine newspaper paper
pen pencil map sign poster picture painting photo photograph drawing sketch
illustration logo pattern background texture design icon vector banner card
letter envelope box basket blanket pillow towel rug carpet curtain vase candle
toy doll teddy guitar piano violin drum microphone speaker headphone trophy
medal flag balloon gift present tent campfire fountain statue sculpture
""".split()

PLURALS = {
    "man": "men", "woman": "women", "child": "children", "person": "people",
    "mouse": "mice", "sheep": "sheep", "fish": "fish", "deer": "deer",
    "goose": "geese", "knife": "knives", "leaf": "leaves", "shelf": "shelves",
    "wolf": "wolves", "foot": "feet", "tooth": "teeth",
}

ADJS = """
red blue green yellow white black brown gray pink purple orange golden silver
big small large little tiny huge tall short long old young new modern vintage
ancient wooden metal plastic glass stone leather cotton wet dry hot cold warm
sunny cloudy snowy rainy dark bright colorful beautiful pretty cute ugly happy
sad smiling angry busy empty crowded quiet clean dirty fresh delicious tasty
healthy fancy simple elegant rustic cozy open closed broken shiny soft hard
round square flat steep narrow wide heavy light fast slow wild calm lush dense
""".split()

VERBS_ING = """
sitting standing walking running riding holding eating drinking playing looking
watching carrying wearing reading writing talking smiling jumping flying swimming
sleeping lying resting cooking cutting throwing catching kicking hitting driving
pulling pushing waiting working painting dancing singing climbing skiing surfing
skating fishing feeding hugging kissing laughing crossing parked floating hanging
leaning grazing posing shopping cleaning washing building fixing using showing
""".split()

VERBS_3SG = """
sits stands walks runs rides holds eats drinks plays looks watches carries wears
reads writes talks smiles jumps flies swims sleeps lies rests cooks cuts throws
catches kicks hits drives pulls pushes waits works paints dances sings climbs
crosses floats hangs leans grazes poses shows uses cleans washes builds fixes
""".split()

VERBS_PAST = """
sat stood walked ran rode held ate drank played looked watched carried wore read
wrote talked smiled jumped flew swam slept rested cooked cut threw caught kicked
hit drove pulled pushed waited worked painted danced sang climbed crossed
""".split()

PREPS = """
on in at near under over behind beside next_to in_front_of on_top_of inside
outside across along through around above below between by with without from
into onto toward against among during after before
""".split()

NAMES = """
John Mary David Sarah Michael Emma James Anna Robert Lisa Paris London Tokyo
Rome Berlin Sydney Chicago Boston Texas California Florida Japan China India
Italy France Spain Canada Mexico Brazil Africa Europe Amazon Google Apple
Microsoft Nike Adidas Disney Ford Toyota Christmas Easter Halloween Monday
Friday January July December
""".split()

DETS = ["a", "the", "the", "a", "this", "that", "some", "his", "her", "their",
        "my", "our", "its", "every", "another"]
NUMS = ["two", "three", "four", "five", "six", "several", "many", "10", "2",
        "3", "20", "100", "a few", "some"]
ADVS = ["very", "really", "quite", "slowly", "quickly", "together", "alone",
        "outside", "nearby", "here", "there", "happily", "carefully", "almost",
        "just", "still", "too", "also", "up", "down", "away", "back"]
AUX_BE = ["is", "was"]
AUX_BE_PL = ["are", "were"]
CONJS = ["and", "or", "but", "while", "because", "as", "when"]
PRONS = ["he", "she", "they", "it", "we", "you", "i", "someone", "everyone"]


def plural(n):
    if n in PLURALS:
        return PLURALS[n]
    if n.endswith(("s", "x", "ch", "sh")):
        return n + "es"
    if n.endswith("y") and n[-2] not in "aeiou":
        return n[:-1] + "ies"
    return n + "s"


class Gen:
    def __init__(self, rng):
        self.r = rng

    def noun(self):
        return self.r.choice(NOUNS)

    def adjs(self):
        k = self.r.choice([0, 0, 0, 1, 1, 2])
        return [self.r.choice(ADJS) for _ in range(k)]

    def nominal(self, pl=False):
        parts = self.adjs()
        if self.r.random() < 0.15:
            parts.append(self.noun())  # compound noun
        head = self.noun()
        parts.append(plural(head) if pl else head)
        return " ".join(parts)

    def np(self, pl=None):
        if pl is None:
            pl = self.r.random() < 0.3
        if self.r.random() < 0.06:
            return self.r.choice(NAMES), False
        if pl:
            pre = self.r.choice(NUMS + ["the", "some", "", ""])
            s = (pre + " " + self.nominal(True)).strip()
            return s, True
        det = self.r.choice(DETS)
        nom = self.nominal(False)
        if det == "a" and nom[0] in "aeiou":
            det = "an"
        return det + " " + nom, False

    def pp(self):
        p = self.r.choice(PREPS).replace("_", " ")
        return p + " " + self.np()[0]

    def clause(self):
        subj, pl = self.np()
        t = self.r.randrange(9)
        obj = self.np()[0]
        if t == 0:
            return f"{subj} {self.r.choice(VERBS_ING)} {self.pp()}"
        if t == 1:
            be = self.r.choice(AUX_BE_PL if pl else AUX_BE)
            return f"{subj} {be} {self.r.choice(VERBS_ING)} {obj}"
        if t == 2:
            if pl:
                return f"{subj} {self.r.choice(VERBS_PAST)} {obj} {self.pp()}"
            return f"{subj} {self.r.choice(VERBS_3SG)} {obj} {self.pp()}"
        if t == 3:
            be = "are" if pl else "is"
            return f"there {be} {subj} {self.pp()}"
        if t == 4:
            return f"{subj} and {obj} {self.pp()}"
        if t == 5:
            lead = self.r.choice(["close up of", "photo of", "a picture of",
                                  "an image of", "view of", "illustration of",
                                  "a painting of", "portrait of"])
            return f"{lead} {subj} {self.pp()}"
        if t == 6:
            be = "are" if pl else "is"
            adv = self.r.choice(["", "very ", "really ", "so "])
            return f"{subj} {be} {adv}{self.r.choice(ADJS)}"
        if t == 7:
            pron = self.r.choice(PRONS)
            v = self.r.choice(VERBS_PAST)
            adv = self.r.choice(ADVS)
            return f"{pron} {v} {obj} {adv}"
        conj = self.r.choice(CONJS)
        return f"{subj} {self.r.choice(VERBS_ING)} {conj} {self.np()[0]} {self.r.choice(VERBS_ING)} {self.pp()}"

    def sentence(self):
        s = self.clause()
        if self.r.random() < 0.25:
            s += " " + self.pp()
        if self.r.random() < 0.1:
            s += ", " + self.np()[0] + " " + self.r.choice(ADVS)
        if self.r.random() < 0.5:
            s = s[0].upper() + s[1:] + "."
        return s


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("output")
    ap.add_argument("--count", type=int, default=6000)
    ap.add_argument("--seed", type=int, default=20240611)
    args = ap.parse_args()
    g = Gen(random.Random(args.seed))
    seen = set()
    with open(args.output, "w", encoding="utf-8") as out:
        while len(seen) < args.count:
            s = g.sentence()
            if s in seen:
                continue
            seen.add(s)
            out.write(s + "\n")


if __name__ == "__main__":
    main()
