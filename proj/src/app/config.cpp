#include "qunet/app/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace qunet::app {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw ConfigError("invalid value '" + text + "' for " + key);
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("invalid boolean '" + text + "' for " + key);
}

std::string format(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string format(bool v) { return v ? "true" : "false"; }

struct Field {
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

Field int_field(int RunConfig::*member) {
    return {[member](RunConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<int>(k, v); },
            [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

template <typename Access>
Field int_at(Access access) {
    return {[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_number<int>(k, v); },
            [access](const RunConfig& c) { return std::to_string(access(c)); }};
}

template <typename Access>
Field real_at(Access access) {
    return {[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_number<double>(k, v); },
            [access](const RunConfig& c) { return format(access(c)); }};
}

template <typename Access>
Field bool_at(Access access) {
    return {[access](RunConfig& c, const std::string& k, const std::string& v) { access(c) = parse_bool(k, v); },
            [access](const RunConfig& c) { return format(static_cast<bool>(access(c))); }};
}

#define QUNET_REF(expr) [](auto& c) -> auto& { return expr; }

const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        t.emplace_back("data.manifest",
                       Field{[](RunConfig& c, const std::string&, const std::string& v) { c.manifest = v; },
                             [](const RunConfig& c) { return c.manifest; }});
        t.emplace_back("data.image_size", int_field(&RunConfig::image_size));
        t.emplace_back("data.synthetic_seed",
                       Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                 if (v.empty()) {
                                     c.synthetic_seed.reset();
                                 } else {
                                     c.synthetic_seed = parse_number<std::uint64_t>(k, v);
                                 }
                             },
                             [](const RunConfig& c) {
                                 return c.synthetic_seed ? std::to_string(*c.synthetic_seed) : std::string{};
                             }});
        t.emplace_back("data.n_stacks", int_at(QUNET_REF(c.synthetic.n_stacks)));
        t.emplace_back("data.slices_per_stack", int_at(QUNET_REF(c.synthetic.slices_per_stack)));
        t.emplace_back("data.raw_size", int_at(QUNET_REF(c.synthetic.image_size)));
        t.emplace_back("data.lesion_count_min", int_at(QUNET_REF(c.synthetic.lesion_count_range.lo)));
        t.emplace_back("data.lesion_count_max", int_at(QUNET_REF(c.synthetic.lesion_count_range.hi)));
        t.emplace_back("data.lesion_radius_min", int_at(QUNET_REF(c.synthetic.lesion_radius_range.lo)));
        t.emplace_back("data.lesion_radius_max", int_at(QUNET_REF(c.synthetic.lesion_radius_range.hi)));
        t.emplace_back("data.blur_sigma_min", real_at(QUNET_REF(c.synthetic.blur_sigma_range.lo)));
        t.emplace_back("data.blur_sigma_max", real_at(QUNET_REF(c.synthetic.blur_sigma_range.hi)));
        t.emplace_back("data.contrast_min", real_at(QUNET_REF(c.synthetic.contrast_range.lo)));
        t.emplace_back("data.contrast_max", real_at(QUNET_REF(c.synthetic.contrast_range.hi)));
        t.emplace_back("data.noise_level", real_at(QUNET_REF(c.synthetic.noise_level)));
        t.emplace_back("data.degraded_fraction", real_at(QUNET_REF(c.synthetic.degraded_fraction)));
        t.emplace_back("data.test_fraction", real_at(QUNET_REF(c.synthetic.test_fraction)));

        t.emplace_back("quality.median_kernel", int_at(QUNET_REF(c.quality.median_kernel)));
        t.emplace_back("quality.eps0", real_at(QUNET_REF(c.quality.eps0)));
        t.emplace_back("quality.cap", int_at(QUNET_REF(c.quality.cap)));
        t.emplace_back("quality.min_for_dedup", int_at(QUNET_REF(c.quality.min_for_dedup)));

        t.emplace_back("model.base_channels", int_at(QUNET_REF(c.model.base_channels)));
        t.emplace_back("model.dropout_rate", real_at(QUNET_REF(c.model.dropout_rate)));

        t.emplace_back("train.learning_rate", real_at(QUNET_REF(c.train.learning_rate)));
        t.emplace_back("train.epochs", int_at(QUNET_REF(c.train.epochs)));
        t.emplace_back("train.batch_size", int_at(QUNET_REF(c.train.batch_size)));
        t.emplace_back("train.augmentation", bool_at(QUNET_REF(c.train.augmentation)));
        t.emplace_back("train.rotation", real_at(QUNET_REF(c.train.augment.rotation)));
        t.emplace_back("train.width_shift", real_at(QUNET_REF(c.train.augment.width_shift)));
        t.emplace_back("train.height_shift", real_at(QUNET_REF(c.train.augment.height_shift)));
        t.emplace_back("train.shear", real_at(QUNET_REF(c.train.augment.shear)));
        t.emplace_back("train.horizontal_flip", bool_at(QUNET_REF(c.train.augment.horizontal_flip)));
        t.emplace_back("train.vertical_flip", bool_at(QUNET_REF(c.train.augment.vertical_flip)));
        t.emplace_back("train.beta1", real_at(QUNET_REF(c.train.beta1)));
        t.emplace_back("train.beta2", real_at(QUNET_REF(c.train.beta2)));
        t.emplace_back("train.epsilon", real_at(QUNET_REF(c.train.epsilon)));
        t.emplace_back("train.finetune_epochs", int_field(&RunConfig::finetune_epochs));
        t.emplace_back("train.finetune_learning_rate", real_at(QUNET_REF(c.finetune_learning_rate)));

        t.emplace_back("selection.q0", real_at(QUNET_REF(c.q0)));
        t.emplace_back("selection.mode",
                       Field{[](RunConfig& c, const std::string&, const std::string& v) { c.mode = select::parse_mode(v); },
                             [](const RunConfig& c) { return select::to_string(c.mode); }});
        t.emplace_back("selection.iterate", bool_at(QUNET_REF(c.iterate)));
        t.emplace_back("selection.max_rounds", int_field(&RunConfig::max_rounds));

        t.emplace_back("baseline.fraction", real_at(QUNET_REF(c.baseline_fraction)));
        t.emplace_back("baseline.runs", int_field(&RunConfig::baseline_runs));

        t.emplace_back("run.output_root",
                       Field{[](RunConfig& c, const std::string&, const std::string& v) { c.output_root = v; },
                             [](const RunConfig& c) { return c.output_root; }});
        t.emplace_back("run.seed", Field{[](RunConfig& c, const std::string& k, const std::string& v) {
                                             c.seed = parse_number<std::uint64_t>(k, v);
                                         },
                                         [](const RunConfig& c) { return std::to_string(c.seed); }});
        return t;
    }();
    return table;
}

#undef QUNET_REF

}  // namespace

void RunConfig::validate() const {
    if (manifest.empty()) data::validate(synthetic_spec());
    pipeline().validate();
    finetune().validate();
    if (!(baseline_fraction > 0.0 && baseline_fraction < 1.0)) throw ConfigError("baseline.fraction must lie in (0, 1)");
    if (baseline_runs < 1) throw ConfigError("baseline.runs must be >= 1");
    if (finetune_epochs < 0) throw ConfigError("train.finetune_epochs must be >= 0");
    if (finetune_learning_rate < 0.0) throw ConfigError("train.finetune_learning_rate must be >= 0");
}

data::SyntheticSpec RunConfig::synthetic_spec() const {
    auto spec = synthetic;
    spec.seed = synthetic_seed.value_or(seed);
    return spec;
}

train::TrainConfig RunConfig::finetune() const {
    auto tc = train;
    if (finetune_epochs > 0) tc.epochs = finetune_epochs;
    if (finetune_learning_rate > 0.0) tc.learning_rate = finetune_learning_rate;
    return tc;
}

select::PipelineConfig RunConfig::pipeline() const {
    select::PipelineConfig p;
    p.quality = quality;
    p.model = model;
    p.model.input_size = image_size;
    p.train = train;
    p.finetune = finetune();
    p.q0 = q0;
    p.mode = mode;
    p.iterate = iterate;
    p.max_rounds = max_rounds;
    p.seed = seed;
    return p;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
    for (const auto& [name, field] : fields()) {
        if (name == key) {
            field.set(config, key, unquote(value));
            return;
        }
    }
    throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> list_settings(const RunConfig& config) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [name, field] : fields()) out.emplace_back(name, field.get(config));
    return out;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    boost::property_tree::ptree tree;
    std::istringstream in(text);
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    RunConfig config;
    for (const auto& [section, entries] : tree) {
        if (entries.empty() && !entries.data().empty()) {
            throw ConfigError(origin + ": key '" + section + "' must belong to a section");
        }
        for (const auto& [key, value] : entries) apply_setting(config, section + "." + key, value.data());
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

std::string render_config(const RunConfig& config) {
    std::ostringstream out;
    std::string section;
    for (const auto& [name, value] : list_settings(config)) {
        const auto dot = name.find('.');
        const auto sec = name.substr(0, dot);
        if (sec != section) {
            if (!section.empty()) out << '\n';
            out << '[' << sec << "]\n";
            section = sec;
        }
        const bool quote = value.empty() || value.find_first_of(" #;") != std::string::npos;
        out << name.substr(dot + 1) << " = " << (quote ? "\"" + value + "\"" : value) << '\n';
    }
    return out.str();
}

}  // namespace qunet::app
