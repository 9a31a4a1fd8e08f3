#include "semret/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "semret/text.hpp"

namespace semret::corpus {

namespace {

using Rng = std::mt19937_64;

// Independent stream per generator so that changing one generator's draws
// never shifts another's.
Rng stream(std::uint64_t seed, std::string_view name) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(fnv1a64(name)),
                    static_cast<std::uint32_t>(fnv1a64(name) >> 32)};
  return Rng(seq);
}

std::size_t pick_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[pick_index(rng, v.size())];
}

bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

// Rank r is drawn with weight 1 / (r + 1).
template <class T>
const T& pick_zipf(Rng& rng, const std::vector<T>& v) {
  std::vector<double> w(v.size());
  for (std::size_t r = 0; r < v.size(); ++r) w[r] = 1.0 / static_cast<double>(r + 1);
  std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
  return v[dist(rng)];
}

struct TypeSeed {
  const char* name;
  std::vector<std::string> title_terms;
  std::vector<std::string> query_terms;
  std::vector<std::string> attributes;
  const char* exemplar = nullptr;
};

struct DepartmentSeed {
  const char* name;
  std::vector<std::string> brands;
  std::vector<std::string> attributes;
  std::vector<TypeSeed> types;
};

const std::vector<DepartmentSeed>& builtin_departments() {
  static const std::vector<DepartmentSeed> kDepartments = {
      {"Food",
       {"horizon organic", "great value", "kraft", "nestle", "kellogg"},
       {"organic", "nonfat", "gluten free", "low sodium", "family size"},
       {{"Milk", {"milk", "dairy", "gallon"}, {"skim", "lactose"}, {"high vitamin d", "reduced fat"},
         "Horizon Organic Nonfat High Vitamin D Milk, Half Gallon"},
        {"Cereal", {"cereal", "granola", "flakes"}, {"breakfast", "oats"}, {"whole grain", "honey"}},
        {"Coffee", {"coffee", "espresso", "beans"}, {"caffeine", "brew"}, {"dark roast", "decaf"}},
        {"Snacks", {"chips", "crackers", "pretzels"}, {"munchies", "crunchy"}, {"sea salt", "cheddar"}},
        {"Pasta", {"pasta", "spaghetti", "penne"}, {"noodles", "macaroni"}, {"durum wheat", "marinara"}}}},
      {"Electronics",
       {"samsung", "sony", "onn", "lg", "jbl"},
       {"wireless", "bluetooth", "hd", "smart", "portable"},
       {{"Television", {"tv", "television", "led"}, {"tele", "screen"}, {"4k uhd", "55 inch"}},
        {"Headphones", {"headphones", "earbuds", "headset"}, {"earphones", "buds"},
         {"noise cancelling", "over ear"}},
        {"Laptop", {"laptop", "notebook", "chromebook"}, {"computer", "pc"}, {"16gb ram", "15 inch"}},
        {"Camera", {"camera", "dslr", "lens"}, {"photography", "photo"}, {"mirrorless", "24mp"}},
        {"Speaker", {"speaker", "soundbar", "subwoofer"}, {"audio", "loudspeaker"},
         {"waterproof", "stereo"}}}},
      {"Home",
       {"mainstays", "better homes", "hometrends", "ninja", "pioneer woman"},
       {"stainless", "ceramic", "modern", "cotton", "nonstick"},
       {{"Cookware", {"skillet", "saucepan", "pot"}, {"frying", "pan"}, {"cast iron", "10 piece"}},
        {"Bedding", {"sheets", "comforter", "pillowcase"}, {"bedspread", "duvet"},
         {"queen size", "microfiber"}},
        {"Lamp", {"lamp", "lampshade", "bulb"}, {"lighting", "light"}, {"desk", "floor"}},
        {"Vacuum", {"vacuum", "cleaner", "mop"}, {"hoover", "sweeper"}, {"cordless", "bagless"}},
        {"Storage", {"bin", "organizer", "shelf"}, {"containers", "closet"}, {"stackable", "plastic"}}}},
      {"Beauty",
       {"olay", "cerave", "maybelline", "dove", "loreal"},
       {"hydrating", "fragrance free", "sensitive", "natural", "vegan"},
       {{"Shampoo", {"shampoo", "conditioner", "haircare"}, {"hair wash", "dandruff"},
         {"volumizing", "argan oil"}},
        {"Lipstick", {"lipstick", "lip gloss", "liner"}, {"makeup", "lips"}, {"matte", "long lasting"}},
        {"Lotion", {"lotion", "moisturizer", "cream"}, {"skincare", "dry skin"}, {"spf 30", "body"}},
        {"Perfume", {"perfume", "cologne", "eau de parfum"}, {"scent", "smell"}, {"floral", "3 4 oz"}},
        {"Razor", {"razor", "blades", "trimmer"}, {"shaving", "shaver"}, {"5 blade", "electric"}}}},
      {"Toys",
       {"lego", "mattel", "hasbro", "fisher price", "hot wheels"},
       {"kids", "educational", "ages 3", "colorful", "deluxe"},
       {{"Building Sets", {"bricks", "building set", "blocks"}, {"construction", "build"},
         {"1000 pieces", "starter"}},
        {"Dolls", {"doll", "dollhouse", "barbie"}, {"dress up", "girl toy"}, {"fashion", "accessories"}},
        {"Puzzles", {"puzzle", "jigsaw", "board game"}, {"brain teaser", "game night"},
         {"500 piece", "family"}},
        {"RC Cars", {"rc car", "remote control", "truck"}, {"racing toy", "drift"},
         {"rechargeable", "off road"}},
        {"Plush", {"plush", "stuffed animal", "teddy"}, {"cuddly", "soft toy"}, {"bear", "12 inch"}}}},
      {"Sports",
       {"nike", "adidas", "ozark trail", "spalding", "coleman"},
       {"outdoor", "lightweight", "durable", "indoor", "pro"},
       {{"Bikes", {"bike", "bicycle", "cycle"}, {"mountain", "bmx"}, {"21 speed", "26 inch"}},
        {"Tents", {"tent", "canopy", "shelter"}, {"camping", "campsite"}, {"4 person", "instant"}},
        {"Balls", {"basketball", "football", "soccer ball"}, {"hoops", "kickball"},
         {"official size", "rubber"}},
        {"Fitness", {"yoga mat", "dumbbell", "resistance band"}, {"workout", "gym"},
         {"nonslip", "20 lb"}},
        {"Running Shoes", {"sneakers", "running shoes", "trainers"}, {"jogging", "footwear"},
         {"mens", "breathable"}}}},
      {"Automotive",
       {"mobil", "michelin", "bosch", "armor all", "everstart"},
       {"universal", "heavy duty", "all weather", "premium", "oem"},
       {{"Motor Oil", {"motor oil", "engine oil", "lubricant"}, {"oil change", "5w30"},
         {"full synthetic", "5 quart"}},
        {"Tires", {"tire", "wheel", "rim"}, {"tyres", "treads"}, {"all season", "17 inch"}},
        {"Wipers", {"wiper blades", "windshield wiper", "wiper"}, {"rain", "windscreen"},
         {"22 inch", "beam"}},
        {"Car Battery", {"car battery", "jump starter", "battery"}, {"dead battery", "cranking"},
         {"12 volt", "600 cca"}},
        {"Car Care", {"car wash", "wax", "polish"}, {"detailing", "shine"}, {"ceramic", "foam"}}}},
      {"Pets",
       {"purina", "pedigree", "blue buffalo", "iams", "friskies"},
       {"grain free", "adult", "puppy", "natural", "chicken"},
       {{"Dog Food", {"dog food", "kibble", "dog treats"}, {"puppy chow", "canine"}, {"dry", "30 lb"}},
        {"Cat Litter", {"cat litter", "litter box", "scoop"}, {"kitty", "clumping"},
         {"unscented", "40 lb"}},
        {"Aquarium", {"aquarium", "fish tank", "filter"}, {"goldfish", "fishbowl"}, {"10 gallon", "led"}},
        {"Pet Bed", {"pet bed", "dog bed", "crate"}, {"kennel", "sleeping"}, {"orthopedic", "large"}},
        {"Bird Supplies", {"bird seed", "bird cage", "feeder"}, {"parrot", "finch"},
         {"wild", "hanging"}}}},
  };
  return kDepartments;
}

const std::vector<std::string>& builtin_generic_terms() {
  static const std::vector<std::string> kGeneric = {"large",      "small", "black", "white",
                                                    "2 pack",     "value pack", "new", "sale",
                                                    "deal",       "set",  "cheap", "top rated"};
  return kGeneric;
}

// Pronounceable pseudo-words for vocabularies beyond the built-in table.
std::string pseudo_word(std::uint64_t key) {
  static const char* kSyllables[] = {"ka", "lo", "mi", "ren", "tu", "vas", "zor", "pel",
                                     "quin", "dra", "fey", "mok", "sul", "tav", "bri", "nox"};
  std::string w;
  std::uint64_t h = fnv1a64(std::to_string(key));
  const int n = 2 + static_cast<int>(h % 2);
  for (int i = 0; i < n; ++i) {
    h = h * 6364136223846793005ULL + 1442695040888963407ULL;
    w += kSyllables[(h >> 33) % 16];
  }
  return w;
}

std::vector<std::string> pseudo_words(std::uint64_t base, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(pseudo_word(base * 131 + i));
  return out;
}

std::string join_words(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Enum names

std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::head: return "head";
    case Segment::torso: return "torso";
    case Segment::tail: return "tail";
  }
  return "tail";
}

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::general_language: return "general_language";
    case Domain::sem: return "sem";
    case Domain::organic: return "organic";
    case Domain::ads: return "ads";
  }
  return "ads";
}

std::string_view to_string(LabelSource s) {
  switch (s) {
    case LabelSource::synthetic_truth: return "synthetic_truth";
    case LabelSource::pseudo_label: return "pseudo_label";
    case LabelSource::human: return "human";
  }
  return "human";
}

std::string_view to_string(NegativeKind k) { return k == NegativeKind::hard ? "hard" : "easy"; }

Segment parse_segment(std::string_view s) {
  if (s == "head") return Segment::head;
  if (s == "torso") return Segment::torso;
  if (s == "tail") return Segment::tail;
  throw std::invalid_argument("unknown segment: " + std::string(s));
}

Domain parse_domain(std::string_view s) {
  for (auto d : kAllDomains)
    if (to_string(d) == s) return d;
  throw std::invalid_argument("unknown domain: " + std::string(s));
}

LabelSource parse_label_source(std::string_view s) {
  if (s == "synthetic_truth") return LabelSource::synthetic_truth;
  if (s == "pseudo_label") return LabelSource::pseudo_label;
  if (s == "human") return LabelSource::human;
  throw std::invalid_argument("unknown label source: " + std::string(s));
}

NegativeKind parse_negative_kind(std::string_view s) {
  if (s == "hard") return NegativeKind::hard;
  if (s == "easy") return NegativeKind::easy;
  throw std::invalid_argument("unknown negative kind: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Taxonomy

Taxonomy Taxonomy::make(std::size_t n_departments, std::size_t n_product_types,
                        std::size_t extra_query_terms) {
  if (n_departments == 0 || n_product_types == 0)
    throw std::invalid_argument("taxonomy counts must be non-zero");
  if (n_product_types < n_departments)
    throw std::invalid_argument("n_product_types must be >= n_departments");

  const auto& seeds = builtin_departments();
  Taxonomy t;
  t.generic_ = builtin_generic_terms();
  for (std::size_t d = 0; d < n_departments; ++d) {
    DepartmentInfo info;
    if (d < seeds.size()) {
      info.name = seeds[d].name;
      info.brands = seeds[d].brands;
      info.attributes = seeds[d].attributes;
    } else {
      info.name = "Department " + std::to_string(d + 1);
      info.brands = pseudo_words(1000 + d, 5);
      info.attributes = pseudo_words(2000 + d, 5);
    }
    t.dept_index_.emplace(info.name, d);
    t.departments_.push_back(std::move(info));
  }
  for (std::size_t j = 0; j < n_product_types; ++j) {
    const std::size_t d = j % n_departments;
    const std::size_t slot = j / n_departments;
    ProductTypeInfo info;
    info.department = t.departments_[d].name;
    if (d < seeds.size() && slot < seeds[d].types.size()) {
      const auto& s = seeds[d].types[slot];
      info.name = s.name;
      info.title_terms = s.title_terms;
      info.query_terms = s.query_terms;
      info.attributes = s.attributes;
      if (s.exemplar) info.exemplar_title = ascii_lower(s.exemplar);
    } else {
      info.name = "Type " + std::to_string(j + 1);
      info.title_terms = pseudo_words(3000 + j, 3);
      info.query_terms = pseudo_words(4000 + j, 2);
      info.attributes = pseudo_words(5000 + j, 2);
    }
    for (auto& w : pseudo_words(6000 + j, extra_query_terms)) info.query_terms.push_back(std::move(w));
    t.type_index_.emplace(info.name, j);
    t.types_.push_back(std::move(info));
  }
  return t;
}

std::size_t Taxonomy::type_index(std::string_view type) const {
  auto it = type_index_.find(std::string(type));
  if (it == type_index_.end()) throw std::out_of_range("unknown product type: " + std::string(type));
  return it->second;
}

std::size_t Taxonomy::department_index(std::string_view dept) const {
  auto it = dept_index_.find(std::string(dept));
  if (it == dept_index_.end()) throw std::out_of_range("unknown department: " + std::string(dept));
  return it->second;
}

const std::string& Taxonomy::department_of(std::string_view type) const {
  return types_[type_index(type)].department;
}

std::vector<std::string> Taxonomy::department_labels() const {
  std::vector<std::string> out;
  for (const auto& d : departments_) out.push_back(d.name);
  return out;
}

std::vector<std::string> Taxonomy::product_type_labels() const {
  std::vector<std::string> out;
  for (const auto& t : types_) out.push_back(t.name);
  return out;
}

int truth_grade(const Taxonomy& taxonomy, std::string_view intended_type, const Product& p) {
  if (p.product_type == intended_type) return 2;
  if (p.department == taxonomy.department_of(intended_type)) return 1;
  return 0;
}

// ---------------------------------------------------------------------------
// Catalog and queries

std::vector<Product> generate_catalog(const Taxonomy& taxonomy, std::uint64_t seed,
                                      std::size_t n_products, double confuser_rate) {
  if (n_products == 0) throw std::invalid_argument("n_products must be non-zero");
  if (confuser_rate < 0.0 || confuser_rate > 1.0) throw std::invalid_argument("confuser_rate must lie in [0, 1]");
  auto rng = stream(seed, "catalog");
  auto mention_rng = stream(seed, "catalog.mentions");
  const auto& types = taxonomy.product_types();
  std::vector<std::vector<std::size_t>> siblings(types.size());
  for (std::size_t a = 0; a < types.size(); ++a)
    for (std::size_t b = 0; b < types.size(); ++b)
      if (a != b && types[a].department == types[b].department) siblings[a].push_back(b);
  std::vector<bool> exemplar_used(types.size(), false);
  std::vector<Product> out;
  out.reserve(n_products);
  for (std::size_t i = 0; i < n_products; ++i) {
    const std::size_t ti = i % types.size();
    const auto& type = types[ti];
    const auto& dept = taxonomy.departments()[taxonomy.department_index(type.department)];
    Product p;
    p.id = 1000001 + i;
    p.department = type.department;
    p.product_type = type.name;
    if (type.exemplar_title && !exemplar_used[ti]) {
      exemplar_used[ti] = true;
      p.title = *type.exemplar_title;
    } else {
      std::vector<std::string> parts;
      parts.push_back(pick(rng, dept.brands));
      if (coin(rng, 0.5)) parts.push_back(pick(rng, dept.attributes));
      if (coin(rng, 0.6)) parts.push_back(pick(rng, type.attributes));
      const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const std::size_t noun = r < 0.5 ? 0 : (r < 0.75 ? 1 : 2) % type.title_terms.size();
      parts.push_back(type.title_terms[noun]);
      // Accessory-style mention of a sibling type: lexically close, not that type.
      if (!siblings[ti].empty() && coin(mention_rng, confuser_rate)) {
        const auto& other = types[pick(mention_rng, siblings[ti])];
        parts.push_back("for");
        parts.push_back(pick(mention_rng, other.title_terms));
      }
      p.title = join_words(parts);
      if (coin(rng, 0.7)) p.title += ", " + pick(rng, taxonomy.generic_terms());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Product> generate_catalog(std::uint64_t seed, std::size_t n_products,
                                      std::size_t n_departments, std::size_t n_product_types) {
  return generate_catalog(Taxonomy::make(n_departments, n_product_types), seed, n_products);
}

namespace {

std::string query_text(const Taxonomy& taxonomy, const ProductTypeInfo& type, Segment seg, Rng& rng) {
  const auto& dept = taxonomy.departments()[taxonomy.department_index(type.department)];
  const auto& generic = taxonomy.generic_terms();
  const auto& noun = pick(rng, type.title_terms);
  const auto& shifted = pick_zipf(rng, type.query_terms);
  switch (seg) {
    case Segment::head:
      switch (pick_index(rng, 3)) {
        case 0: return noun;
        case 1: return join_words({pick(rng, dept.brands), noun});
        default: return join_words({pick(rng, type.attributes), noun});
      }
    case Segment::torso:
      switch (pick_index(rng, 4)) {
        case 0: return join_words({pick(rng, dept.brands), pick(rng, type.attributes), noun});
        case 1: return join_words({pick(rng, dept.attributes), noun, pick(rng, generic)});
        case 2: return join_words({noun, pick(rng, generic)});
        default: return join_words({shifted, noun});
      }
    case Segment::tail:
      switch (pick_index(rng, 5)) {
        case 0: return shifted;
        case 1: return join_words({shifted, pick(rng, generic)});
        case 2: return join_words({pick(rng, dept.attributes), shifted});
        case 3: return join_words({"best", shifted, pick(rng, generic)});
        default: return join_words({pick(rng, generic), shifted, pick(rng, dept.attributes)});
      }
  }
  return noun;
}

}  // namespace

std::vector<Query> generate_queries(const Taxonomy& taxonomy, std::uint64_t seed,
                                    std::size_t n_queries, double head_share, double torso_share) {
  if (head_share < 0 || torso_share < 0 || head_share + torso_share > 1.0)
    throw std::invalid_argument("segment shares must be non-negative and sum to <= 1");
  auto rng = stream(seed, "queries");
  const auto n_head = static_cast<std::size_t>(std::llround(head_share * static_cast<double>(n_queries)));
  const auto n_torso = static_cast<std::size_t>(std::llround(torso_share * static_cast<double>(n_queries)));
  const std::size_t n_tail = n_queries - std::min(n_queries, n_head + n_torso);
  const std::pair<Segment, std::size_t> plan[] = {
      {Segment::head, n_head}, {Segment::torso, n_torso}, {Segment::tail, n_tail}};

  const auto& types = taxonomy.product_types();
  std::unordered_set<std::string> seen;
  std::vector<Query> out;
  out.reserve(n_queries);
  std::uint64_t next_id = 5000001;
  for (const auto& [seg, count] : plan) {
    std::size_t made = 0;
    std::size_t attempts = 0;
    while (made < count && attempts < count * 200 + 1000) {
      ++attempts;
      const auto& type = types[pick_index(rng, types.size())];
      auto text = query_text(taxonomy, type, seg, rng);
      if (!seen.insert(text).second) continue;
      out.push_back(Query{next_id++, std::move(text), seg, type.name});
      ++made;
    }
  }
  return out;
}

bool is_heldout(const Query& q, std::uint64_t seed, double holdout_fraction) {
  const auto h = fnv1a64("heldout:" + std::to_string(seed) + ":" + std::to_string(q.id));
  return static_cast<double>(h % 1000000) < holdout_fraction * 1000000.0;
}

// ---------------------------------------------------------------------------
// Click log

std::vector<InteractionEvent> generate_click_log(const Taxonomy& taxonomy,
                                                 const std::vector<Product>& catalog,
                                                 const std::vector<Query>& queries,
                                                 std::uint64_t seed, std::size_t n_events,
                                                 const ClickModel& model) {
  if (catalog.empty() || queries.empty())
    throw std::invalid_argument("click log needs a non-empty catalog and query set");
  if (n_events == 0) return {};

  const auto& types = taxonomy.product_types();
  std::vector<std::vector<std::size_t>> by_type(types.size());
  std::vector<std::vector<std::size_t>> by_dept(taxonomy.departments().size());
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    by_type[taxonomy.type_index(catalog[i].product_type)].push_back(i);
    by_dept[taxonomy.department_index(catalog[i].department)].push_back(i);
  }

  // Shown set per query: what a lexical legacy system would surface.
  auto shown_rng = stream(seed, "shown");
  std::vector<std::vector<std::size_t>> shown(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const auto ti = taxonomy.type_index(queries[qi].intended_product_type);
    const auto di = taxonomy.department_index(types[ti].department);
    std::vector<std::size_t> same_type = by_type[ti];
    std::shuffle(same_type.begin(), same_type.end(), shown_rng);
    same_type.resize(std::min(same_type.size(), model.shown_same_type));
    std::vector<std::size_t> same_dept;
    for (auto pi : by_dept[di])
      if (catalog[pi].product_type != types[ti].name) same_dept.push_back(pi);
    std::shuffle(same_dept.begin(), same_dept.end(), shown_rng);
    // Lexical matching favours titles that mention the intended type's nouns.
    std::stable_partition(same_dept.begin(), same_dept.end(), [&](std::size_t pi) {
      const auto words = semret::split_words(catalog[pi].title);
      return std::any_of(words.begin(), words.end(), [&](const std::string& w) {
        return std::find(types[ti].title_terms.begin(), types[ti].title_terms.end(), w) !=
               types[ti].title_terms.end();
      });
    });
    same_dept.resize(std::min(same_dept.size(), model.shown_same_department));
    auto& s = shown[qi];
    s = same_type;
    s.insert(s.end(), same_dept.begin(), same_dept.end());
    std::set<std::size_t> taken(s.begin(), s.end());
    for (std::size_t k = 0, tries = 0; k < model.shown_other && tries < 100; ++tries) {
      const auto pi = pick_index(shown_rng, catalog.size());
      if (catalog[pi].department == types[ti].department || !taken.insert(pi).second) continue;
      s.push_back(pi);
      ++k;
    }
  }

  std::vector<std::size_t> by_segment[3];
  for (std::size_t qi = 0; qi < queries.size(); ++qi)
    by_segment[static_cast<int>(queries[qi].segment)].push_back(qi);
  double traffic[3] = {model.head_traffic, model.torso_traffic,
                       std::max(0.0, 1.0 - model.head_traffic - model.torso_traffic)};
  for (int s = 0; s < 3; ++s)
    if (by_segment[s].empty()) traffic[s] = 0.0;
  std::discrete_distribution<int> segment_dist({traffic[0], traffic[1], traffic[2]});

  auto rng = stream(seed, "clicks");
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::pair<std::uint64_t, std::uint64_t>> agg;
  for (std::size_t e = 0; e < n_events; ++e) {
    const int seg = segment_dist(rng);
    const auto qi = by_segment[seg][pick_index(rng, by_segment[seg].size())];
    if (shown[qi].empty()) continue;
    const auto pi = pick(rng, shown[qi]);
    const auto& q = queries[qi];
    const auto& p = catalog[pi];
    double ctr = model.ctr_other;
    if (p.product_type == q.intended_product_type) ctr = model.ctr_match;
    else if (p.department == taxonomy.department_of(q.intended_product_type))
      ctr = model.ctr_same_department;
    auto& cell = agg[{q.id, p.id}];
    cell.first += 1;
    if (coin(rng, ctr)) cell.second += 1;
  }

  std::vector<InteractionEvent> out;
  out.reserve(agg.size());
  for (const auto& [key, counts] : agg)
    out.push_back(InteractionEvent{key.first, key.second, counts.first, counts.second});
  return out;
}

// ---------------------------------------------------------------------------
// Pseudo-labels and negatives

std::optional<int> pseudo_grade(const InteractionEvent& e, std::uint64_t click_threshold) {
  if (click_threshold < 1) throw std::invalid_argument("click_threshold must be >= 1");
  if (e.clicks >= click_threshold) return 2;
  if (e.clicks >= 1) return 1;
  return std::nullopt;
}

namespace {

template <class T>
std::unordered_map<std::uint64_t, const T*> by_id(const std::vector<T>& v) {
  std::unordered_map<std::uint64_t, const T*> m;
  for (const auto& x : v) m.emplace(x.id, &x);
  return m;
}

}  // namespace

std::vector<LabeledPair> pseudo_label(const std::vector<InteractionEvent>& events,
                                      const std::vector<Product>& catalog,
                                      const std::vector<Query>& queries,
                                      std::uint64_t click_threshold) {
  const auto products = by_id(catalog);
  const auto qs = by_id(queries);
  std::vector<LabeledPair> out;
  for (const auto& e : events) {
    const auto grade = pseudo_grade(e, click_threshold);
    if (!grade) continue;
    auto pit = products.find(e.product_id);
    auto qit = qs.find(e.query_id);
    if (pit == products.end() || qit == qs.end()) continue;
    out.push_back(LabeledPair{qit->second->text, pit->second->title, *grade, Domain::ads,
                              LabelSource::pseudo_label});
  }
  return out;
}

bool is_hard_negative(const InteractionEvent& e, std::uint64_t impression_floor, double ctr_ceiling) {
  if (e.impressions < impression_floor || e.impressions == 0) return false;
  return static_cast<double>(e.clicks) / static_cast<double>(e.impressions) <= ctr_ceiling;
}

std::vector<TrainingTriplet> mine_negatives(const std::vector<InteractionEvent>& events,
                                            const std::vector<Product>& catalog,
                                            const std::vector<Query>& queries,
                                            const MiningConfig& cfg) {
  if (cfg.impression_floor < 1) throw std::invalid_argument("impression_floor must be >= 1");
  if (cfg.ctr_ceiling < 0.0 || cfg.ctr_ceiling >= 1.0)
    throw std::invalid_argument("ctr_ceiling must lie in [0, 1)");
  if (cfg.hard_fraction < 0.0 || cfg.hard_fraction > 1.0)
    throw std::invalid_argument("hard_fraction must lie in [0, 1]");

  const auto products = by_id(catalog);
  const auto qs = by_id(queries);

  std::map<std::string, std::vector<const Product*>> by_dept;
  for (const auto& p : catalog) by_dept[p.department].push_back(&p);

  struct QueryNegatives {
    const Query* query;
    std::vector<const Product*> positives;
    std::vector<const Product*> hard;
    std::vector<const Product*> easy_pool;
  };
  std::map<std::uint64_t, QueryNegatives> per_query;
  std::map<std::uint64_t, std::set<std::string>> clicked_depts;
  for (const auto& e : events) {
    auto pit = products.find(e.product_id);
    auto qit = qs.find(e.query_id);
    if (pit == products.end() || qit == qs.end()) continue;
    auto& qn = per_query[e.query_id];
    qn.query = qit->second;
    if (e.clicks >= cfg.click_threshold) qn.positives.push_back(pit->second);
    if (e.clicks >= 1) clicked_depts[e.query_id].insert(pit->second->department);
    if (is_hard_negative(e, cfg.impression_floor, cfg.ctr_ceiling)) qn.hard.push_back(pit->second);
  }

  std::vector<const QueryNegatives*> with_hard;
  std::vector<const QueryNegatives*> with_easy;
  for (auto& [qid, qn] : per_query) {
    if (qn.positives.empty()) continue;
    const auto& depts = clicked_depts[qid];
    for (const auto& [dept, items] : by_dept)
      if (!depts.contains(dept)) qn.easy_pool.insert(qn.easy_pool.end(), items.begin(), items.end());
    if (!qn.hard.empty()) with_hard.push_back(&qn);
    if (!qn.easy_pool.empty()) with_easy.push_back(&qn);
  }

  std::size_t n_hard = static_cast<std::size_t>(
      std::llround(cfg.hard_fraction * static_cast<double>(cfg.n_triplets)));
  if (with_hard.empty()) n_hard = 0;
  std::size_t n_easy = cfg.n_triplets - n_hard;
  if (with_easy.empty()) n_easy = 0;

  auto rng = stream(cfg.seed, "negatives");
  std::vector<TrainingTriplet> out;
  out.reserve(n_hard + n_easy);
  auto emit = [&](const std::vector<const QueryNegatives*>& pool, NegativeKind kind, std::size_t n) {
    std::size_t made = 0;
    for (std::size_t tries = 0; made < n && tries < n * 20; ++tries) {
      const auto* qn = pool[pick_index(rng, pool.size())];
      const auto* pos = pick(rng, qn->positives);
      const auto& negs = kind == NegativeKind::hard ? qn->hard : qn->easy_pool;
      const auto* neg = pick(rng, negs);
      if (pos->title == neg->title) continue;
      out.push_back(TrainingTriplet{qn->query->text, pos->title, neg->title, kind});
      ++made;
    }
  };
  emit(with_hard, NegativeKind::hard, n_hard);
  emit(with_easy, NegativeKind::easy, n_easy);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

// ---------------------------------------------------------------------------
// World and derived datasets

const Product& World::product(std::uint64_t id) const { return catalog.at(product_index.at(id)); }
const Query& World::query(std::uint64_t id) const { return queries.at(query_index.at(id)); }

World generate_world(const CorpusConfig& config) {
  World w;
  w.config = config;
  w.taxonomy = Taxonomy::make(config.n_departments, config.n_product_types, config.extra_query_terms);
  w.catalog = generate_catalog(w.taxonomy, config.seed, config.n_products, config.confuser_rate);
  w.queries = generate_queries(w.taxonomy, config.seed, config.n_queries, config.head_share,
                               config.torso_share);
  for (std::size_t i = 0; i < w.catalog.size(); ++i) w.product_index.emplace(w.catalog[i].id, i);
  for (std::size_t i = 0; i < w.queries.size(); ++i) w.query_index.emplace(w.queries[i].id, i);
  for (const auto& q : w.queries)
    (is_heldout(q, config.seed, config.holdout_fraction) ? w.heldout_queries : w.train_queries)
        .push_back(q);
  ClickModel model;
  model.shown_same_type = config.shown_same_type;
  model.shown_same_department = config.shown_same_department;
  model.shown_other = config.shown_other;
  model.ctr_match = config.ctr_match;
  model.ctr_same_department = config.ctr_same_department;
  model.ctr_other = config.ctr_other;
  model.head_traffic = config.head_traffic;
  model.torso_traffic = config.torso_traffic;
  if (!w.train_queries.empty())
    w.events = generate_click_log(w.taxonomy, w.catalog, w.train_queries, config.seed,
                                  config.n_events, model);
  return w;
}

namespace {

struct SentenceFrame {
  std::vector<std::string> subjects;  // [0] canonical, rest paraphrases
  std::vector<std::string> actions;
};

const std::vector<SentenceFrame>& subject_frames() {
  static const std::vector<SentenceFrame> kSubjects = {
      {{"a man", "a guy", "a gentleman"}, {}},
      {{"a woman", "a lady"}, {}},
      {{"a child", "a kid", "a youngster"}, {}},
      {{"two dogs", "a pair of dogs"}, {}},
      {{"a chef", "a cook"}, {}},
      {{"the students", "the pupils"}, {}},
      {{"an old man", "an elderly man"}, {}},
      {{"a girl", "a young girl"}, {}},
  };
  return kSubjects;
}

const std::vector<std::vector<std::string>>& action_frames() {
  static const std::vector<std::vector<std::string>> kActions = {
      {"is riding a bicycle", "is cycling on a bike"},
      {"is cooking dinner", "is preparing a meal"},
      {"is playing the guitar", "is strumming a guitar"},
      {"is reading a book", "is looking through a novel"},
      {"is running in the park", "is jogging outdoors"},
      {"is sleeping on the couch", "is napping on the sofa"},
      {"is swimming in the lake", "is paddling through the water"},
      {"is painting a picture", "is making a drawing"},
      {"is climbing a mountain", "is hiking up a peak"},
      {"is washing the car", "is cleaning a vehicle"},
  };
  return kActions;
}

const std::vector<std::string>& places() {
  static const std::vector<std::string> kPlaces = {"in the morning", "at the beach", "in the city",
                                                   "at home", "near the river", "after school"};
  return kPlaces;
}

const std::vector<std::string>& neutral_details() {
  static const std::vector<std::string> kDetails = {"with a friend", "for a competition",
                                                    "while it rains", "for the first time",
                                                    "to relax", "on a holiday"};
  return kDetails;
}

struct SentenceSeed {
  std::size_t subject, action, place;
};

std::string premise(const SentenceSeed& s) {
  return join_words({subject_frames()[s.subject].subjects[0], action_frames()[s.action][0],
                     places()[s.place]});
}

std::string paraphrase(const SentenceSeed& s, Rng& rng) {
  const auto& subj = subject_frames()[s.subject].subjects;
  const auto& act = action_frames()[s.action];
  return join_words({subj[1 + pick_index(rng, subj.size() - 1)], act[1], places()[s.place]});
}

std::string neutral(const SentenceSeed& s, Rng& rng) {
  return join_words({subject_frames()[s.subject].subjects[0], action_frames()[s.action][0],
                     pick(rng, neutral_details())});
}

std::string contradiction(const SentenceSeed& s, Rng& rng) {
  std::size_t other = s.action;
  while (other == s.action) other = pick_index(rng, action_frames().size());
  return join_words({subject_frames()[s.subject].subjects[0], action_frames()[other][0],
                     places()[s.place]});
}

SentenceSeed random_sentence(Rng& rng) {
  return {pick_index(rng, subject_frames().size()), pick_index(rng, action_frames().size()),
          pick_index(rng, places().size())};
}

// Title rewritten with the shopper vocabulary of its type.
std::string shifted_title(const Taxonomy& taxonomy, const Product& p, Rng& rng) {
  const auto& type = taxonomy.product_types()[taxonomy.type_index(p.product_type)];
  std::string base = p.title.substr(0, p.title.find(','));
  std::string replacement = pick_zipf(rng, type.query_terms);
  for (const auto& term : type.title_terms) {
    const auto pos = base.find(term);
    if (pos != std::string::npos) {
      base.replace(pos, term.size(), replacement);
      replacement.clear();
      break;
    }
  }
  if (!replacement.empty()) base += " " + replacement;
  // Drop the brand (first department brand found at the start) half the time.
  const auto& dept = taxonomy.departments()[taxonomy.department_index(p.department)];
  if (coin(rng, 0.5)) {
    for (const auto& brand : dept.brands) {
      if (base.rfind(brand + " ", 0) == 0) {
        base = base.substr(brand.size() + 1);
        break;
      }
    }
  }
  return base;
}

struct CatalogIndex {
  std::vector<std::vector<const Product*>> by_type;
  std::vector<std::vector<const Product*>> by_dept;

  CatalogIndex(const Taxonomy& t, const std::vector<Product>& catalog)
      : by_type(t.product_types().size()), by_dept(t.departments().size()) {
    for (const auto& p : catalog) {
      by_type[t.type_index(p.product_type)].push_back(&p);
      by_dept[t.department_index(p.department)].push_back(&p);
    }
  }
};

// Same type, same department (other type), or other department.
const Product* sample_relative(const Taxonomy& t, const CatalogIndex& idx,
                               const std::vector<Product>& catalog, std::string_view type,
                               int wanted_grade, Rng& rng) {
  const auto ti = t.type_index(type);
  const auto& dept = t.product_types()[ti].department;
  const auto di = t.department_index(dept);
  for (int tries = 0; tries < 100; ++tries) {
    const Product* p = nullptr;
    if (wanted_grade == 2) {
      if (idx.by_type[ti].empty()) return nullptr;
      p = pick(rng, idx.by_type[ti]);
    } else if (wanted_grade == 1) {
      if (idx.by_dept[di].empty()) return nullptr;
      p = pick(rng, idx.by_dept[di]);
    } else {
      p = &catalog[pick_index(rng, catalog.size())];
    }
    if (truth_grade(t, type, *p) == wanted_grade) return p;
  }
  return nullptr;
}

}  // namespace

DomainDatasets build_domain_datasets(const World& world) {
  const auto& cfg = world.config;
  const auto& t = world.taxonomy;
  const CatalogIndex idx(t, world.catalog);
  DomainDatasets out;

  {
    auto rng = stream(cfg.seed, "general_language");
    auto& pairs = out[Domain::general_language];
    for (std::size_t i = 0; i < cfg.general_pairs; ++i) {
      const auto s = random_sentence(rng);
      const int grade = 2 - static_cast<int>(i % 3);
      std::string hyp = grade == 2 ? paraphrase(s, rng) : grade == 1 ? neutral(s, rng) : contradiction(s, rng);
      pairs.push_back({premise(s), std::move(hyp), grade, Domain::general_language,
                       LabelSource::synthetic_truth});
    }
  }

  {
    auto rng = stream(cfg.seed, "sem");
    auto& pairs = out[Domain::sem];
    for (std::size_t i = 0; i < cfg.sem_pairs && !world.catalog.empty(); ++i) {
      const auto& src = world.catalog[pick_index(rng, world.catalog.size())];
      auto query = shifted_title(t, src, rng);
      const Product* item = nullptr;
      if (coin(rng, 0.75)) {
        item = sample_relative(t, idx, world.catalog, src.product_type, 2, rng);
      } else {
        item = &world.catalog[pick_index(rng, world.catalog.size())];
      }
      if (!item) continue;
      pairs.push_back({std::move(query), item->title, truth_grade(t, src.product_type, *item),
                       Domain::sem, LabelSource::synthetic_truth});
    }
  }

  {
    auto rng = stream(cfg.seed, "organic");
    auto& pairs = out[Domain::organic];
    for (std::size_t i = 0; i < cfg.organic_pairs && !world.train_queries.empty(); ++i) {
      const auto& q = pick(rng, world.train_queries);
      const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      const int wanted = r < 0.4 ? 2 : (r < 0.7 ? 1 : 0);
      const auto* item = sample_relative(t, idx, world.catalog, q.intended_product_type, wanted, rng);
      if (!item) continue;
      pairs.push_back({q.text, item->title, wanted, Domain::organic, LabelSource::synthetic_truth});
    }
  }

  {
    auto rng = stream(cfg.seed, "ads");
    auto pairs = pseudo_label(world.events, world.catalog, world.train_queries, cfg.click_threshold);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    if (pairs.size() > cfg.ads_pairs) pairs.resize(cfg.ads_pairs);
    out[Domain::ads] = std::move(pairs);
  }
  return out;
}

std::vector<TrainingTriplet> build_triplets(const World& world) {
  const auto& c = world.config;
  MiningConfig m;
  m.impression_floor = c.impression_floor;
  m.ctr_ceiling = c.ctr_ceiling;
  m.click_threshold = c.click_threshold;
  m.hard_fraction = c.hard_fraction;
  m.n_triplets = c.n_triplets;
  m.seed = c.seed;
  return mine_negatives(world.events, world.catalog, world.train_queries, m);
}

PretrainSet build_pretrain_pairs(const Taxonomy& taxonomy, const std::vector<Product>& catalog,
                                 const std::vector<Query>& queries, std::size_t n_per_task,
                                 std::uint64_t seed) {
  if (catalog.empty()) throw std::invalid_argument("pretrain pairs need a catalog");
  PretrainSet set;
  set.department_labels = taxonomy.department_labels();
  set.product_type_labels = taxonomy.product_type_labels();
  auto rng = stream(seed, "pretrain");

  auto emit = [&](std::vector<PretrainPair>& out, bool by_department) {
    for (std::size_t i = 0; i < n_per_task; ++i) {
      const auto& p = catalog[pick_index(rng, catalog.size())];
      const auto& label = by_department ? p.department : p.product_type;
      out.push_back({p.title, label,
                     by_department ? taxonomy.department_index(label) : taxonomy.type_index(label)});
    }
    for (std::size_t i = 0; i < n_per_task && !queries.empty(); ++i) {
      const auto& q = queries[pick_index(rng, queries.size())];
      const auto& label =
          by_department ? taxonomy.department_of(q.intended_product_type) : q.intended_product_type;
      out.push_back({q.text, label,
                     by_department ? taxonomy.department_index(label) : taxonomy.type_index(label)});
    }
  };
  emit(set.department, true);
  emit(set.product_type, false);
  return set;
}

PretrainSet build_pretrain_pairs(const World& world) {
  return build_pretrain_pairs(world.taxonomy, world.catalog, world.train_queries,
                              world.config.pretrain_per_task, world.config.seed);
}

FeedbackPools build_feedback_pools(const World& world) {
  const auto& cfg = world.config;
  const auto& t = world.taxonomy;
  const CatalogIndex idx(t, world.catalog);
  auto rng = stream(cfg.seed, "feedback");
  const std::size_t n = cfg.feedback_queries_per_domain;
  FeedbackPools pools;

  auto product_pool = [&](std::string_view type) {
    std::vector<FeedbackCandidate> cands;
    std::set<std::uint64_t> used;
    const std::pair<int, int> plan[] = {{2, 10}, {1, 10}, {0, 20}};
    for (const auto& [grade, count] : plan) {
      for (int k = 0, tries = 0; k < count && tries < 200; ++tries) {
        const auto* p = sample_relative(t, idx, world.catalog, type, grade, rng);
        if (!p || !used.insert(p->id).second) continue;
        cands.push_back({p->id, p->title, grade});
        ++k;
      }
    }
    return cands;
  };

  std::vector<const Query*> heldout;
  for (const auto& q : world.heldout_queries) heldout.push_back(&q);
  std::shuffle(heldout.begin(), heldout.end(), rng);
  std::size_t cursor = 0;
  for (Domain d : {Domain::organic, Domain::ads}) {
    auto& list = pools[d];
    for (std::size_t i = 0; i < n && !heldout.empty(); ++i) {
      const auto* q = heldout[cursor++ % heldout.size()];
      list.push_back({q->id, d, q->text, product_pool(q->intended_product_type)});
    }
  }

  {
    auto& list = pools[Domain::sem];
    for (std::size_t i = 0; i < n; ++i) {
      const auto& src = world.catalog[pick_index(rng, world.catalog.size())];
      list.push_back({8000001 + i, Domain::sem, shifted_title(t, src, rng), product_pool(src.product_type)});
    }
  }

  {
    auto& list = pools[Domain::general_language];
    std::uint64_t next_item = 9000001;
    for (std::size_t i = 0; i < n; ++i) {
      const auto s = random_sentence(rng);
      FeedbackQuery fq{7000001 + i, Domain::general_language, premise(s), {}};
      std::set<std::string> seen{fq.query_text};
      auto add = [&](std::string text, int grade) {
        if (!seen.insert(text).second) return;
        fq.candidates.push_back({next_item++, std::move(text), grade});
      };
      for (int k = 0; k < 3; ++k) add(paraphrase(s, rng), 2);
      for (int k = 0; k < 3; ++k) add(neutral(s, rng), 1);
      for (int k = 0; k < 3; ++k) add(contradiction(s, rng), 0);
      for (int k = 0; k < 11; ++k) {
        auto other = random_sentence(rng);
        if (other.subject == s.subject) continue;
        add(premise(other), 0);
      }
      list.push_back(std::move(fq));
    }
  }
  return pools;
}

}  // namespace semret::corpus
