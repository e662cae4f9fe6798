#include "stackplan/io.hpp"

#include <fstream>
#include <sstream>

namespace stackplan {

namespace {

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("config key '") + key + "': " + e.what());
    }
}

std::map<std::string, double> read_table(const Json& j, const char* key) {
    std::map<std::string, double> table;
    if (!j.contains(key)) return table;
    if (!j.at(key).is_object()) throw InvalidInput(std::string("'") + key + "' must be an object");
    for (const auto& [name, value] : j.at(key).items()) {
        if (!value.is_number()) throw InvalidInput(std::string(key) + "[" + name + "] is not a number");
        table[name] = value.get<double>();
    }
    return table;
}

}  // namespace

void Config::check() const {
    noise.check();
    reward.check();
    generator.check();
    noise.check_covers(generator.category_names());
    if (horizon < 0) throw InvalidInput("horizon must be nonnegative");
    if (retry_cap < 0) throw InvalidInput("retry_cap must be nonnegative");
    if (!(presence_prior > 0.0 && presence_prior <= 1.0)) throw InvalidInput("presence_prior must lie in (0, 1]");
    if (!(no_relation_prior > 0.0 && no_relation_prior < 1.0)) throw InvalidInput("no_relation_prior must lie in (0, 1)");
    if (!(minutes_per_grasp >= 0.0)) throw InvalidInput("minutes_per_grasp must be nonnegative");
}

Json to_json(const SceneGraph& graph) {
    Json objects = Json::array();
    for (std::size_t i = 0; i < graph.size(); ++i) {
        objects.push_back({{"id", i}, {"category", graph.categories()[i]}});
    }
    Json edges = Json::array();
    for (const auto& e : graph.edges()) {
        edges.push_back({{"parent", e.parent.value}, {"child", e.child.value}, {"kind", to_string(e.kind)}});
    }
    return {{"objects", objects}, {"edges", edges}};
}

SceneGraph scene_from_json(const Json& j) {
    try {
        if (!j.is_object() || !j.contains("objects")) throw InvalidInput("scene file has no 'objects' array");
        const auto& objects = j.at("objects");
        std::vector<std::string> categories(objects.size());
        std::vector<bool> seen(objects.size(), false);
        for (const auto& o : objects) {
            const auto id = o.at("id").get<std::int64_t>();
            if (id < 0 || static_cast<std::size_t>(id) >= objects.size() || seen[static_cast<std::size_t>(id)]) {
                throw InvalidInput("object ids must be dense and unique in [0, " + std::to_string(objects.size()) +
                                   "); got " + std::to_string(id));
            }
            seen[static_cast<std::size_t>(id)] = true;
            categories[static_cast<std::size_t>(id)] = o.at("category").get<std::string>();
        }
        std::vector<SupportEdge> edges;
        if (j.contains("edges")) {
            for (const auto& e : j.at("edges")) {
                const auto parent = e.at("parent").get<std::int64_t>();
                const auto child = e.at("child").get<std::int64_t>();
                const auto kind = e.at("kind").get<std::string>();
                if (parent < 0 || child < 0) throw InvalidInput("edge endpoints must be nonnegative");
                if (kind != "stable" && kind != "weak") {
                    throw InvalidInput("edge kind must be 'stable' or 'weak', got '" + kind + "'");
                }
                edges.push_back({ObjectId{static_cast<std::uint32_t>(parent)}, ObjectId{static_cast<std::uint32_t>(child)},
                                 kind == "stable" ? SupportKind::Stable : SupportKind::Weak});
            }
        }
        return SceneGraph(std::move(categories), std::move(edges));
    } catch (const Json::exception& e) {
        throw InvalidInput(std::string("malformed scene: ") + e.what());
    }
}

SceneGraph scene_from_json(const Json& j, const NoiseProfile& noise) {
    SceneGraph graph = scene_from_json(j);
    noise.check_covers(graph.categories());
    return graph;
}

Json to_json(const NoiseProfile& noise) {
    return {{"recall", noise.recall}, {"grasp_success", noise.grasp_success}};
}

NoiseProfile noise_from_json(const Json& j) {
    NoiseProfile noise;
    noise.recall = read_table(j, "recall");
    noise.grasp_success = read_table(j, "grasp_success");
    noise.check();
    return noise;
}

Json to_json(const Config& config) {
    Json categories = Json::array();
    for (const auto& c : config.generator.categories) {
        categories.push_back({{"name", c.name}, {"weight", c.weight}, {"container", c.container}, {"size", c.size}});
    }
    return {
        {"noise", to_json(config.noise)},
        {"reward",
         {{"base_penalty", config.reward.base_penalty},
          {"nc_gain", config.reward.nc_gain},
          {"oc_gain", config.reward.oc_gain},
          {"np_penalty", config.reward.np_penalty},
          {"discount", config.reward.discount}}},
        {"generator",
         {{"min_objects", config.generator.min_objects},
          {"max_objects", config.generator.max_objects},
          {"p_stable", config.generator.p_stable},
          {"p_weak", config.generator.p_weak},
          {"p_second_support", config.generator.p_second_support},
          {"categories", categories}}},
        {"horizon", config.horizon},
        {"retry_cap", config.retry_cap},
        {"presence_prior", config.presence_prior},
        {"no_relation_prior", config.no_relation_prior},
        {"minutes_per_grasp", config.minutes_per_grasp},
    };
}

Config config_from_json(const Json& j) {
    if (!j.is_object()) throw InvalidInput("config must be a JSON object");
    Config c;
    if (j.contains("noise")) c.noise = noise_from_json(j.at("noise"));
    if (j.contains("reward")) {
        const auto& r = j.at("reward");
        c.reward.base_penalty = get_or(r, "base_penalty", c.reward.base_penalty);
        c.reward.nc_gain = get_or(r, "nc_gain", c.reward.nc_gain);
        c.reward.oc_gain = get_or(r, "oc_gain", c.reward.oc_gain);
        c.reward.np_penalty = get_or(r, "np_penalty", c.reward.np_penalty);
        c.reward.discount = get_or(r, "discount", c.reward.discount);
    }
    if (j.contains("generator")) {
        const auto& g = j.at("generator");
        auto& gen = c.generator;
        gen.min_objects = get_or(g, "min_objects", gen.min_objects);
        gen.max_objects = get_or(g, "max_objects", gen.max_objects);
        gen.p_stable = get_or(g, "p_stable", gen.p_stable);
        gen.p_weak = get_or(g, "p_weak", gen.p_weak);
        gen.p_second_support = get_or(g, "p_second_support", gen.p_second_support);
        if (g.contains("categories")) {
            gen.categories.clear();
            for (const auto& spec : g.at("categories")) {
                if (!spec.contains("name")) throw InvalidInput("generator category without a name");
                gen.categories.push_back({spec.at("name").get<std::string>(), get_or(spec, "weight", 1.0),
                                          get_or(spec, "container", false), get_or(spec, "size", 1)});
            }
        }
    }
    c.horizon = get_or(j, "horizon", c.horizon);
    c.retry_cap = get_or(j, "retry_cap", c.retry_cap);
    c.presence_prior = get_or(j, "presence_prior", c.presence_prior);
    c.no_relation_prior = get_or(j, "no_relation_prior", c.no_relation_prior);
    c.minutes_per_grasp = get_or(j, "minutes_per_grasp", c.minutes_per_grasp);
    c.check();
    return c;
}

Json to_json(const Plan& plan, const SceneGraph& graph) {
    Json steps = Json::array();
    for (const auto& s : plan.steps) {
        Json moved = Json::array();
        std::ostringstream label;
        label << s.action.object.value << ':' << graph.category(s.action.object);
        std::string carried;
        for (ObjectId m : s.moved) {
            moved.push_back(m.value);
            if (m == s.action.object) continue;
            carried += (carried.empty() ? "" : ", ") + std::to_string(m.value) + ":" + graph.category(m);
        }
        if (!carried.empty()) label << " (" << carried << ')';
        steps.push_back({{"action", to_string(s.action.kind)},
                         {"object", s.action.object.value},
                         {"moved", moved},
                         {"dest", to_string(s.destination)},
                         {"label", label.str()}});
    }
    return {{"steps", steps}, {"grasps", plan.grasp_count()}, {"value", plan.value}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw InvalidInput("failed writing " + path.string());
}

Config load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

SceneGraph load_scene(const std::filesystem::path& path, const NoiseProfile& noise) {
    try {
        return scene_from_json(read_json_file(path), noise);
    } catch (const InvalidInput& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

}  // namespace stackplan
