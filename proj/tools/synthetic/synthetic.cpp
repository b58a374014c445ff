#include "synthetic.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "ause/random.hpp"

namespace ause::synthetic {
namespace {

const std::vector<std::string> kOnsets{"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
const std::vector<std::string> kVowels{"a", "e", "i", "o", "u"};

const std::vector<std::string> kCategories{"tree", "bird", "river", "mountain", "city", "ship", "flower", "lake"};
const std::vector<std::string> kPlaces{"coast", "valley", "desert", "harbor", "forest", "island",
                                       "plateau", "marsh",  "canyon", "meadow", "glacier", "delta"};
const std::vector<std::string> kAttributes{
    "amber",  "copper", "jade",    "silk",   "marble",  "honey",  "saffron", "cobalt", "ivory",  "pearl",
    "cedar",  "velvet", "granite", "lotus",  "crimson", "linen",  "walnut",  "ember",  "coral",  "thistle",
    "indigo", "basalt", "topaz",   "clover", "sable",   "quartz", "juniper", "opal",   "hazel",  "russet"};
const std::vector<std::string> kFiller{
    "people",  "often",  "visit", "during", "summer", "winter", "many",    "travelers", "describe", "old",
    "stories", "about",  "local", "guides", "mention", "quiet", "mornings", "long",     "evenings", "near",
    "markets", "sell",   "maps",  "small",  "boats",  "wander", "past",    "bright",    "fields",   "under",
    "cold",    "skies",  "warm",  "rain",   "arrives", "late",  "children", "learn",    "songs",    "from",
    "elders",  "every",  "spring", "roads", "lead",    "toward", "hills",  "and",       "walls",    "carry",
    "faded",   "paint",  "some",  "say",    "records", "show",  "changes", "over",      "years",    "slowly"};

std::string make_entity(Rng& rng, std::set<std::string>& used) {
  for (;;) {
    std::string w;
    const std::size_t syllables = 3;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kOnsets[rng.below(kOnsets.size())];
      w += kVowels[rng.below(kVowels.size())];
    }
    if (used.insert(w).second) return w;
  }
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

std::string filler_sentence(Rng& rng, const std::string& own_attr, double distractor_rate) {
  const std::size_t len = 6 + rng.below(4);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < len; ++i) words.push_back(pick(rng, kFiller));
  if (rng.uniform() < distractor_rate) {
    std::string other;
    do other = pick(rng, kAttributes);
    while (other == own_attr);
    words[1 + rng.below(len - 1)] = other;
  }
  std::string s;
  for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
  return s + ".";
}

std::string describe(Rng& rng, const std::string& e, const std::string& cat, const std::string& place) {
  switch (rng.below(4)) {
    case 0: return "The " + e + " is a " + cat + " near the " + place + ".";
    case 1: return "Beside the " + place + " stands a " + cat + " called " + e + ".";
    case 2: return e + " names an old " + cat + " of the " + place + ".";
    default: return "Maps of the " + place + " show a " + cat + ", the " + e + ".";
  }
}

std::string praise(Rng& rng, const std::string& e, const std::string& attr) {
  switch (rng.below(4)) {
    case 0: return "The " + e + " is known for its " + attr + ".";
    case 1: return "Locals praise " + e + " for its " + attr + ".";
    case 2: return "Visitors remember " + e + " because of its " + attr + ".";
    default: return "Its " + attr + " made " + e + " famous.";
  }
}

}  // namespace

Dataset generate(const Spec& spec) {
  if (spec.documents == 0) throw std::invalid_argument("synthetic spec needs at least one document");
  if (spec.queries > spec.documents) throw std::invalid_argument("more queries than documents");
  if (spec.min_filler > spec.max_filler) throw std::invalid_argument("min_filler exceeds max_filler");

  Rng rng = Rng::substream(spec.seed, "synthetic");
  std::set<std::string> used(kFiller.begin(), kFiller.end());
  used.insert(kAttributes.begin(), kAttributes.end());

  struct Fact {
    std::string entity, category, place, attribute;
  };
  std::vector<Fact> facts;
  Dataset out;
  for (std::size_t i = 0; i < spec.documents; ++i) {
    Fact f{make_entity(rng, used), pick(rng, kCategories), pick(rng, kPlaces), pick(rng, kAttributes)};
    std::string body;
    if (spec.varied_templates) {
      body = describe(rng, f.entity, f.category, f.place) + " " + praise(rng, f.entity, f.attribute);
    } else {
      body = "The " + f.entity + " is a " + f.category + " near the " + f.place + ". The " + f.entity +
             " is known for its " + f.attribute + ".";
    }
    const std::size_t fillers = spec.min_filler + rng.below(spec.max_filler - spec.min_filler + 1);
    for (std::size_t k = 0; k < fillers; ++k) body += " " + filler_sentence(rng, f.attribute, spec.distractor_rate);
    out.documents.push_back({"doc" + std::to_string(i), f.entity, body});
    facts.push_back(f);
  }

  std::vector<std::size_t> order(spec.documents);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t qi = 0; qi < spec.queries; ++qi) {
    const auto& f = facts[order[qi]];
    Query q;
    q.query_id = "q" + std::to_string(qi);
    q.question = "What is the " + f.entity + " known for?";
    q.caption = "A " + f.category + " by the " + f.place + ".";
    q.answers = {{f.attribute, static_cast<int>(3 + rng.below(4))}, {"its " + f.attribute, 1}};
    q.gold_doc_ids = {out.documents[order[qi]].doc_id};
    std::vector<std::string> choices{f.attribute};
    while (choices.size() < 4) {
      const auto& c = pick(rng, kAttributes);
      if (std::find(choices.begin(), choices.end(), c) == choices.end()) choices.push_back(c);
    }
    rng.shuffle(choices);
    q.correct_choice = static_cast<int>(std::find(choices.begin(), choices.end(), f.attribute) - choices.begin());
    q.choices = std::move(choices);
    out.queries.push_back(std::move(q));
  }
  return out;
}

std::string documents_to_jsonl(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) {
    nlohmann::ordered_json j;
    j["doc_id"] = d.doc_id;
    j["title"] = d.title;
    j["text"] = d.body;
    out += j.dump() + "\n";
  }
  return out;
}

std::string queries_to_jsonl(const std::vector<Query>& queries) {
  std::string out;
  for (const auto& q : queries) {
    nlohmann::ordered_json j;
    j["query_id"] = q.query_id;
    j["question"] = q.question;
    if (!q.caption.empty()) j["caption"] = q.caption;
    j["answers"] = nlohmann::ordered_json::array();
    for (const auto& a : q.answers) j["answers"].push_back({{"text", a.text}, {"count", a.count}});
    if (!q.gold_doc_ids.empty()) j["gold_doc_ids"] = q.gold_doc_ids;
    if (!q.choices.empty()) j["choices"] = q.choices;
    if (q.correct_choice) j["correct_choice"] = *q.correct_choice;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace ause::synthetic
