#include "cfsim/landmarks.hpp"

#include <fstream>
#include <sstream>

#include "cfsim/errors.hpp"

namespace cfsim {

std::string to_string(Laterality lat) {
  switch (lat) {
    case Laterality::kMidline: return "midline";
    case Laterality::kLeft: return "left";
    case Laterality::kRight: return "right";
  }
  return "midline";
}

Laterality laterality_from_string(const std::string& s) {
  if (s == "midline") return Laterality::kMidline;
  if (s == "left") return Laterality::kLeft;
  if (s == "right") return Laterality::kRight;
  throw SchemaError("unknown laterality '" + s + "'");
}

std::string to_string(LandmarkSet set) {
  return set == LandmarkSet::kSetA ? "set_A" : "set_B";
}

LandmarkSet landmark_set_from_string(const std::string& s) {
  if (s == "set_A" || s == "A") return LandmarkSet::kSetA;
  if (s == "set_B" || s == "B") return LandmarkSet::kSetB;
  throw ConfigError("unknown landmark set '" + s + "' (expected set_A or set_B)");
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}

double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("cannot parse " + what + " from '" + s + "'");
  }
}

std::string base_name(const LandmarkDef& def) {
  if (def.laterality == Laterality::kMidline) return def.name;
  return def.name.substr(def.name.find(' ') + 1);
}

}  // namespace

LandmarkRegistry LandmarkRegistry::parse(const std::string& text) {
  LandmarkRegistry reg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("version", 0) == 0) {
      reg.version_ = static_cast<int>(parse_real(line.substr(7), "template version"));
      continue;
    }
    const auto fields = split_csv(line);
    if (fields.size() != 10) {
      throw SchemaError("template line " + std::to_string(line_no) + ": expected 10 fields, got " +
                        std::to_string(fields.size()));
    }
    LandmarkDef def;
    def.id = static_cast<LandmarkId>(reg.defs_.size());
    def.name = fields[0];
    def.laterality = laterality_from_string(fields[1]);
    if (reg.by_name_.count(def.name) > 0) {
      throw SchemaError("duplicate landmark name '" + def.name + "'");
    }
    const Point3 bone(parse_real(fields[2], "bone_x"), parse_real(fields[3], "bone_y"),
                      parse_real(fields[4], "bone_z"));
    Point3 out(parse_real(fields[5], "out_x"), parse_real(fields[6], "out_y"),
               parse_real(fields[7], "out_z"));
    const double norm = out.norm();
    if (!(norm > 0.0)) {
      throw SchemaError("landmark '" + def.name + "' has zero outward direction");
    }
    out /= norm;
    const double mu = parse_real(fields[8], "fstt_mean_mm");
    const double sd = parse_real(fields[9], "fstt_sd_mm");
    if (!(mu > 0.0) || !(sd >= 0.0)) {
      throw SchemaError("landmark '" + def.name + "' has invalid thickness parameters");
    }
    reg.by_name_.emplace(def.name, def.id);
    reg.defs_.push_back(def);
    reg.bone_.push_back(bone);
    reg.outward_.push_back(out);
    reg.fstt_mean_.push_back(mu);
    reg.fstt_sd_.push_back(sd);
  }
  if (reg.version_ != 1) {
    throw SchemaError("unsupported template version " + std::to_string(reg.version_));
  }

  // Pair left/right entries by base name.
  reg.mirror_.assign(reg.defs_.size(), -1);
  std::unordered_map<std::string, LandmarkId> left, right;
  for (const auto& def : reg.defs_) {
    if (def.laterality == Laterality::kMidline) {
      reg.mirror_[def.id] = def.id;
    } else if (def.laterality == Laterality::kLeft) {
      left.emplace(base_name(def), def.id);
    } else {
      right.emplace(base_name(def), def.id);
    }
  }
  for (const auto& [base, lid] : left) {
    const auto it = right.find(base);
    if (it == right.end()) throw SchemaError("unpaired left landmark '" + base + "'");
    reg.mirror_[lid] = it->second;
    reg.mirror_[it->second] = lid;
  }
  for (const auto& [base, rid] : right) {
    if (left.count(base) == 0) throw SchemaError("unpaired right landmark '" + base + "'");
  }
  return reg;
}

LandmarkRegistry LandmarkRegistry::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open template file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const LandmarkRegistry& LandmarkRegistry::builtin() {
  static const LandmarkRegistry reg = parse(builtin_template_text());
  return reg;
}

LandmarkId LandmarkRegistry::id_of(const std::string& name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) {
    throw UnknownLandmark("landmark '" + name + "' is not in the registry");
  }
  return it->second;
}

std::vector<LandmarkId> LandmarkRegistry::set_ids(LandmarkSet set) const {
  const auto& names = set == LandmarkSet::kSetA ? set_a_names() : set_b_names();
  std::vector<LandmarkId> ids;
  ids.reserve(names.size());
  for (const auto& name : names) ids.push_back(id_of(name));
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<LandmarkId> LandmarkRegistry::midline_ids(const std::vector<LandmarkId>& ids) const {
  std::vector<LandmarkId> out;
  for (LandmarkId id : ids) {
    if (defs_.at(id).laterality == Laterality::kMidline) out.push_back(id);
  }
  return out;
}

const std::vector<std::string>& set_a_names() {
  static const std::vector<std::string> names = {
      "Glabella",
      "Left Dacryon",
      "Left Ectoconchion",
      "Left Frontomalare Orbitale",
      "Left Frontotemporale",
      "Left Mid-supraorbital",
      "Left Nasomaxillare",
      "Left Orbitale",
      "Left Superciliare",
      "Left Supraorbital Ridge",
      "Left Zygion",
      "Left Zygomatic",
      "Left Zygomaxillare",
      "Left Zygoorbitale",
      "Nasion",
      "Rhinion",
      "Right Dacryon",
      "Right Ectoconchion",
      "Right Frontomalare Orbitale",
      "Right Frontotemporale",
      "Right Mid-supraorbital",
      "Right Nasomaxillare",
      "Right Orbitale",
      "Right Superciliare",
      "Right Supraorbital Ridge",
      "Right Zygion",
      "Right Zygomatic",
      "Right Zygomaxillare",
      "Right Zygoorbitale",
  };
  return names;
}

const std::vector<std::string>& set_b_names() {
  static const std::vector<std::string> names = {
      "Glabella",
      "Gnathion",
      "Left Ectoconchion",
      "Left Ectomolare_2",
      "Left Frontomalare Orbitale",
      "Left Frontotemporale",
      "Left Mentale",
      "Left Mid-nasomaxillare",
      "Left Mid-ramus",
      "Left Nasomaxillare",
      "Left Orbitale",
      "Left Superciliare",
      "Left Supra Canine",
      "Left Zygion",
      "Mid-philtrum",
      "Nasion",
      "Prosthion",
      "Right Ectoconchion",
      "Right Ectomolare_2",
      "Right Frontomalare Orbitale",
      "Right Frontotemporale",
      "Right Mentale",
      "Right Mid-nasomaxillare",
      "Right Mid-ramus",
      "Right Nasomaxillare",
      "Right Orbitale",
      "Right Superciliare",
      "Right Supra Canine",
      "Right Zygion",
  };
  return names;
}

}  // namespace cfsim
