//! Templated customer-support corpus: 20 topics, each with its own keywords,
//! plus topic-free filler lines shared by every topic.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 20_240_611;
pub const TRAIN_DIALOGUES: usize = 1800;
pub const HELDOUT_DIALOGUES: usize = 200;

pub const TOPICS: [(&str, [&str; 8]); 20] = [
    ("internet", ["internet", "router", "wifi", "modem", "signal", "cable", "fiber", "ethernet"]),
    ("billing", ["bill", "invoice", "charge", "payment", "refund", "amount", "debit", "discount"]),
    ("roaming", ["roaming", "abroad", "travel", "country", "border", "network", "tariff", "holiday"]),
    ("sim", ["sim", "card", "pin", "puk", "slot", "activation", "esim", "blocked"]),
    ("phone", ["phone", "screen", "battery", "charger", "camera", "button", "speaker", "microphone"]),
    ("tv", ["tv", "channel", "remote", "decoder", "recording", "guide", "satellite", "antenna"]),
    ("contract", ["contract", "subscription", "renewal", "cancellation", "term", "plan", "upgrade", "penalty"]),
    ("data", ["data", "bundle", "megabytes", "limit", "speed", "usage", "hotspot", "throttle"]),
    ("voicemail", ["voicemail", "message", "greeting", "mailbox", "call", "ring", "forwarding", "missed"]),
    ("delivery", ["delivery", "package", "courier", "order", "tracking", "address", "parcel", "shipment"]),
    ("password", ["password", "account", "login", "username", "recovery", "email", "verification", "locked"]),
    ("app", ["app", "install", "store", "version", "notification", "crash", "widget", "permissions"]),
    ("number", ["number", "transfer", "porting", "provider", "code", "request", "donor", "migration"]),
    ("coverage", ["coverage", "mast", "reception", "outage", "area", "bars", "indoor", "rural"]),
    ("sms", ["sms", "text", "sender", "spam", "inbox", "report", "shortcode", "mms"]),
    ("insurance", ["insurance", "damage", "claim", "repair", "theft", "policy", "deductible", "warranty"]),
    ("landline", ["landline", "dial", "tone", "socket", "handset", "line", "extension", "cordless"]),
    ("tablet", ["tablet", "keyboard", "stylus", "case", "storage", "display", "dock", "touch"]),
    ("music", ["music", "playlist", "streaming", "song", "album", "offline", "artist", "lyrics"]),
    ("shop", ["shop", "appointment", "visit", "opening", "staff", "queue", "branch", "counter"]),
];

const DAYS: [&str; 4] = ["monday", "yesterday", "today", "friday"];

const OPENINGS: [&str; 4] = [
    "hi my {0} and {1} are not working",
    "hello i have a problem with {0} {1} {2}",
    "my {0} {1} failed {d}",
    "good morning question about {0} {1} {2}",
];

const CUSTOMER_SPECIFIC: [&str; 4] =
    ["the {0} {1} still fails", "i tried {0} {1} {2}", "what about {0} {1}", "{0} {1} {2} again {d}"];

const CUSTOMER_GENERIC: [&str; 2] = ["ok thanks", "yes please"];

const AGENT_SPECIFIC: [&str; 4] =
    ["please check the {0} {1} {2}", "i will reset the {0} {1}", "your {0} {1} {2} is fixed", "we send a new {0} {1}"];

const AGENT_GENERIC: [&str; 2] = ["let me check that for you", "one moment please"];

const CLOSINGS: [&str; 2] = ["anything else i can do", "have a nice day"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyDialogue {
    pub topic: usize,
    /// `(speaker, text)` per utterance.
    pub utterances: Vec<(&'static str, String)>,
}

impl ToyDialogue {
    pub fn to_line(&self) -> String {
        let mut out = String::new();
        for (speaker, text) in &self.utterances {
            out.push_str(&format!("{speaker}: {text} __eou__ "));
        }
        out.trim_end().to_owned()
    }
}

fn fill(template: &str, topic: usize, rng: &mut ChaCha8Rng) -> String {
    let words: Vec<&str> = TOPICS[topic].1.choose_multiple(rng, 3).copied().collect();
    template
        .replace("{0}", words[0])
        .replace("{1}", words[1])
        .replace("{2}", words[2])
        .replace("{d}", DAYS.choose(rng).unwrap())
}

fn line(specific: &[&str], generic: &[&str], p_generic: f64, topic: usize, rng: &mut ChaCha8Rng) -> String {
    if rng.random_bool(p_generic) {
        generic.choose(rng).unwrap().to_string()
    } else {
        fill(specific.choose(rng).unwrap(), topic, rng)
    }
}

fn dialogue(rng: &mut ChaCha8Rng) -> ToyDialogue {
    let topic = rng.random_range(0..TOPICS.len());
    let turns = rng.random_range(5..=8);
    let mut utterances = vec![("A", fill(OPENINGS.choose(rng).unwrap(), topic, rng))];
    for t in 1..turns {
        let speaker = if t % 2 == 1 { "B" } else { "A" };
        if speaker == "B" {
            utterances.push((speaker, line(&AGENT_SPECIFIC, &AGENT_GENERIC, 0.15, topic, rng)));
            if rng.random_bool(0.3) {
                utterances.push((speaker, fill(AGENT_SPECIFIC.choose(rng).unwrap(), topic, rng)));
            }
        } else {
            utterances.push((speaker, line(&CUSTOMER_SPECIFIC, &CUSTOMER_GENERIC, 0.15, topic, rng)));
        }
    }
    if rng.random_bool(0.5) {
        let speaker = if turns % 2 == 1 { "B" } else { "A" };
        let text = if speaker == "B" { *CLOSINGS.choose(rng).unwrap() } else { "thanks bye" };
        utterances.push((speaker, text.to_owned()));
    }
    ToyDialogue { topic, utterances }
}

/// Training and held-out dialogues from one seeded stream.
pub fn generate(seed: u64) -> (Vec<ToyDialogue>, Vec<ToyDialogue>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<ToyDialogue> = (0..TRAIN_DIALOGUES + HELDOUT_DIALOGUES).map(|_| dialogue(&mut rng)).collect();
    let (train, heldout) = all.split_at(TRAIN_DIALOGUES);
    (train.to_vec(), heldout.to_vec())
}

pub fn render(dialogues: &[ToyDialogue]) -> String {
    dialogues.iter().map(|d| d.to_line() + "\n").collect()
}

/// Topic whose keywords the text uses, if exactly one.
pub fn topic_of(text: &str) -> Option<usize> {
    let hits: Vec<usize> =
        (0..TOPICS.len()).filter(|&t| text.split_whitespace().any(|w| TOPICS[t].1.contains(&w))).collect();
    (hits.len() == 1).then(|| hits[0])
}
