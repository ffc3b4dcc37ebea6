// Command-line front end. Every subcommand maps onto one API call, either on an
// embedded service over the local data root or on a running daemon (--url).
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "slamhive/analysis.hpp"
#include "slamhive/config_json.hpp"
#include "slamhive/demo.hpp"
#include "slamhive/service.hpp"
#include "slamhive/util.hpp"

// after Eigen: <resolv.h> defines a _res macro that clashes with Eigen internals
#include <httplib.h>

using namespace slamhive;
using nlohmann::json;

namespace {

struct Globals {
  std::string config_file;
  std::string root;
  std::string url;
  std::string mode;
  double time_scale = 0.0;
  bool json_output = false;
};

class Client {
 public:
  explicit Client(const Globals& g) : globals_(g) {
    if (!g.url.empty()) {
      http_ = std::make_unique<httplib::Client>(g.url);
      http_->set_read_timeout(3600, 0);
      return;
    }
    auto config = service::load_deployment_config(
        g.config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(g.config_file));
    if (!g.root.empty()) config.data_root = g.root;
    if (!g.mode.empty()) config.mode = service::parse_mode(g.mode);
    if (g.time_scale > 0.0) config.time_scale = g.time_scale;
    config.validate();
    executor::AdapterRegistry registry;
    for (const auto& [image, path] : config.adapters) registry.add(image, path);
    if (!registry.contains(demo::kMockImage)) {
      const auto self = std::filesystem::read_symlink("/proc/self/exe").parent_path();
      for (const auto& candidate : {self / "mock_slam_adapter", self / ".." / "tools" / "mock_slam_adapter"}) {
        if (std::filesystem::exists(candidate)) {
          registry.add(demo::kMockImage, std::filesystem::canonical(candidate));
          break;
        }
      }
    }
    api_ = std::make_unique<service::Api>(config, nullptr, registry);
  }

  // Body of a successful call; API errors go to stderr and end the process.
  json call(const std::string& method, const std::string& path, const std::string& body = "",
            const std::map<std::string, std::string>& query = {}, std::string* raw = nullptr) {
    int status = 0;
    json out;
    std::string text;
    if (api_) {
      auto response = api_->handle(method, path, body, query);
      status = response.status;
      out = response.body;
      if (response.raw) text = *response.raw;
    } else {
      httplib::Params params(query.begin(), query.end());
      httplib::Result result = method == "GET" ? http_->Get(path, params, httplib::Headers{})
                                               : http_->Post(path, body, "application/json");
      if (!result) {
        std::cerr << "cannot reach " << globals_.url << ": " << httplib::to_string(result.error()) << "\n";
        std::exit(2);
      }
      status = result->status;
      if (result->get_header_value("Content-Type").rfind("application/json", 0) == 0) {
        out = json::parse(result->body);
      } else {
        text = result->body;
      }
    }
    if (status >= 400) {
      const auto& err = out.contains("error") ? out["error"] : out;
      std::cerr << "error " << status << ": " << err.value("message", err.dump()) << "\n";
      std::exit(1);
    }
    if (raw) *raw = text;
    return out;
  }

  service::Api* embedded() { return api_.get(); }

 private:
  const Globals& globals_;
  std::unique_ptr<service::Api> api_;
  std::unique_ptr<httplib::Client> http_;
};

std::string read_input(const std::string& path) {
  if (path == "-") return std::string(std::istreambuf_iterator<char>(std::cin), {});
  return util::read_file(path);
}

std::string join_ids(const json& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ' ';
    out += std::to_string(id.get<Id>());
  }
  return out;
}

service::Server* running_server = nullptr;

void on_signal(int) {
  if (running_server) running_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slamhive: mapping-run benchmarking suite"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "deployment config file (YAML or JSON)");
  app.add_option("--root", g.root, "data root, overrides the deployment config");
  app.add_option("--url", g.url, "talk to a running service instead of the embedded one");
  app.add_option("--mode", g.mode, "deployment mode override");
  app.add_option("--time-scale", g.time_scale, "playback speed factor, < 1 is faster than real time");
  app.add_flag("--json", g.json_output, "print the full API response");

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string bind;
  serve->add_option("--bind", bind, "host[:port]");

  auto* demo_cmd = app.add_subcommand("demo", "register the mock algorithm and synthetic datasets");
  int demo_datasets = 2;
  double demo_duration = 10.0;
  demo_cmd->add_option("--datasets", demo_datasets, "number of synthetic datasets");
  demo_cmd->add_option("--duration", demo_duration, "seconds per sequence");

  auto* add = app.add_subcommand("add", "create an algorithm, dataset or configuration from a file");
  std::string add_kind, add_file;
  add->add_option("kind", add_kind)->required()->check(CLI::IsMember({"algorithm", "dataset", "configuration"}));
  add->add_option("file", add_file)->required();

  auto* expand = app.add_subcommand("expand", "store a combination spec and its configurations");
  std::string expand_file;
  bool preview = false;
  expand->add_option("file", expand_file)->required();
  expand->add_flag("--preview", preview, "only count, store nothing");

  auto* run = app.add_subcommand("run", "queue mapping runs");
  std::vector<Id> run_ids;
  int repeats = 1;
  bool no_wait = false;
  std::uint64_t run_seed = 0;
  run->add_option("config_ids", run_ids)->required();
  run->add_option("--repeats", repeats);
  run->add_option("--seed", run_seed, "class assignment seed in cluster and cloud mode");
  run->add_flag("--no-wait", no_wait);

  auto* evaluate = app.add_subcommand("evaluate", "evaluate finished runs");
  std::vector<Id> eval_ids;
  bool all_unevaluated = false, no_align = false, force = false;
  evaluate->add_option("run_ids", eval_ids);
  evaluate->add_flag("--all-unevaluated", all_unevaluated);
  evaluate->add_flag("--no-align", no_align);
  evaluate->add_flag("--force", force, "replace existing evaluations");

  auto* search = app.add_subcommand("search", "search configurations, evaluations or runs");
  std::string query, target = "configurations";
  std::vector<Id> algorithm_ids, dataset_ids;
  bool csv = false;
  search->add_option("query", query, "predicates separated by ';'");
  search->add_option("--target", target)->check(CLI::IsMember({"configurations", "evaluations", "runs"}));
  search->add_option("--algorithm", algorithm_ids);
  search->add_option("--dataset", dataset_ids);
  search->add_flag("--csv", csv);

  auto* analyze = app.add_subcommand("analyze", "create an analysis report from a spec file");
  std::string analyze_file, export_dir;
  analyze->add_option("file", analyze_file)->required();
  analyze->add_option("--export", export_dir, "also copy the raw tables here");

  auto* plan = app.add_subcommand("plan", "simulate a cluster or cloud campaign");
  std::vector<Id> plan_ids;
  std::size_t nodes = 0;
  std::uint64_t plan_seed = 0;
  std::string provision = "none", assignment = "random", cost_file;
  bool show_manifests = false;
  plan->add_option("config_ids", plan_ids, "defaults to every configuration");
  plan->add_option("--nodes", nodes);
  plan->add_option("--seed", plan_seed);
  plan->add_option("--provision", provision)->check(CLI::IsMember({"none", "direct", "snapshot"}));
  plan->add_option("--assignment", assignment)->check(CLI::IsMember({"random", "balanced"}));
  plan->add_option("--cost-model", cost_file);
  plan->add_flag("--manifests", show_manifests);

  auto* get = app.add_subcommand("get", "GET an API path and print the response");
  std::string get_path;
  get->add_option("path", get_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    Client client(g);
    auto print = [&](const json& body) { std::cout << body.dump(2) << "\n"; };

    if (*serve) {
      auto* api = client.embedded();
      if (!api) throw Error(Errc::BadRequest, "serve runs the embedded service; drop --url");
      std::string host = api->config().bind_address;
      int port = api->config().port;
      if (!bind.empty()) {
        const auto colon = bind.rfind(':');
        host = bind.substr(0, colon);
        if (colon != std::string::npos) port = static_cast<int>(util::parse_integer(bind.substr(colon + 1)).value_or(port));
      }
      service::Server server(*api);
      const int bound = server.start(host, port);
      std::cout << "serving " << service::to_string(api->config().mode) << " on http://" << host << ":" << bound
                << "\n"
                << std::flush;
      running_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.wait();
      running_server = nullptr;
      return 0;
    }

    if (*demo_cmd) {
      auto* api = client.embedded();
      const auto algorithm = demo::mock_algorithm(0);
      const auto a = client.call("POST", "/api/algorithms", json(algorithm).dump());
      std::cout << "algorithm " << a["id"] << " " << algorithm.name << "\n";
      for (int d = 1; d <= demo_datasets; ++d) {
        dataprep::SyntheticOptions options;
        options.duration = demo_duration;
        options.seed = static_cast<unsigned>(d);
        const auto dataset = demo::synthetic_dataset(0, "Synthetic" + std::to_string(d), {"seq01"}, options);
        if (api) demo::install_synthetic_dataset(api->layout(), dataset, options);
        const auto r = client.call("POST", "/api/datasets", json(dataset).dump());
        std::cout << "dataset " << r["id"] << " " << dataset.name << "\n";
      }
      if (!api) std::cout << "sequence files were not written; run demo on the service host\n";
      return 0;
    }

    if (*add) {
      const json body = service::parse_document(read_input(add_file));
      const std::string path = add_kind == "algorithm" ? "/api/algorithms"
                               : add_kind == "dataset" ? "/api/datasets"
                                                       : "/api/configurations";
      const auto r = client.call("POST", path, body.dump());
      if (g.json_output) print(r); else std::cout << r["id"] << "\n";
      return 0;
    }

    if (*expand) {
      const json body = service::parse_document(read_input(expand_file));
      const auto r = client.call("POST", preview ? "/api/combination-specs/preview" : "/api/combination-specs",
                                 body.dump());
      if (g.json_output) {
        print(r);
      } else {
        std::cout << r["count"] << "\n";
        if (!preview) std::cout << "ids: " << join_ids(r["configuration_ids"]) << "\n";
      }
      return 0;
    }

    if (*run) {
      const json body{{"config_ids", run_ids}, {"repeats", repeats}, {"wait", !no_wait}, {"seed", run_seed}};
      const auto r = client.call("POST", "/api/tasks", body.dump());
      if (g.json_output) {
        print(r);
      } else if (r.contains("runs")) {
        for (const auto& record : r["runs"])
          std::cout << record["id"] << " config " << record["config_id"] << " " << record["status"].get<std::string>()
                    << " on " << record["node_id"].get<std::string>() << "\n";
      } else {
        std::cout << "queued " << join_ids(r["run_ids"]) << "\n";
      }
      return 0;
    }

    if (*evaluate) {
      json body{{"align", !no_align}, {"force", force}};
      if (all_unevaluated) {
        body["all_unevaluated"] = true;
      } else {
        if (eval_ids.empty()) throw Error(Errc::BadRequest, "give run ids or --all-unevaluated");
        body["run_ids"] = eval_ids;
      }
      const auto r = client.call("POST", "/api/evaluations", body.dump());
      if (g.json_output) {
        print(r);
      } else {
        std::cout << r["count"] << "\n";
        for (const auto& e : r["errors"]) std::cerr << "run " << e["run_id"] << ": " << e["message"].get<std::string>() << "\n";
      }
      return 0;
    }

    if (*search) {
      json body{{"query", query}, {"target", target}, {"algorithm_ids", algorithm_ids}, {"dataset_ids", dataset_ids}};
      if (csv) body["format"] = "csv";
      std::string text;
      const auto r = client.call("POST", "/api/searches", body.dump(), {}, &text);
      if (csv) std::cout << text;
      else if (g.json_output) print(r);
      else std::cout << join_ids(r["ids"]) << "\n";
      return 0;
    }

    if (*analyze) {
      const auto r = client.call("POST", "/api/analyses", json{{"spec", read_input(analyze_file)}}.dump());
      if (g.json_output) {
        print(r);
      } else {
        std::cout << "token " << r["token"].get<std::string>() << "\nurl " << r["url"].get<std::string>() << "\n";
        for (const auto& notice : r["report"]["notices"]) std::cout << "notice: " << notice.get<std::string>() << "\n";
        for (const auto& [mode, output] : r["report"]["outputs"].items()) {
          for (const auto& notice : output["notices"]) std::cout << mode << ": " << notice.get<std::string>() << "\n";
        }
      }
      if (!export_dir.empty()) {
        const auto report = r["report"].get<analysis::AnalysisReport>();
        for (const auto& path : analysis::export_raw(report, export_dir)) std::cout << "wrote " << path.string() << "\n";
      }
      return 0;
    }

    if (*plan) {
      json body{{"config_ids", plan_ids}, {"seed", plan_seed}, {"provision", provision}, {"assignment", assignment}};
      if (nodes > 0) body["nodes"] = nodes;
      if (!cost_file.empty()) body["cost_model"] = read_input(cost_file);
      const auto r = client.call("POST", "/api/plans", body.dump());
      if (g.json_output) {
        print(r);
      } else {
        const auto& tl = r["timeline"];
        std::cout << "tasks " << r["plan"]["task_count"] << " nodes " << r["plan"]["node_count"] << " controllers "
                  << r["plan"]["controllers"].size() << "\n"
                  << "transfer_bytes " << util::format_number(r["transfer"]["total_bytes"].get<double>()) << "\n"
                  << "network_bytes " << util::format_number(tl["network_bytes"].get<double>()) << "\n"
                  << "makespan_s " << util::format_number(tl["makespan"].get<double>()) << "\n";
        if (!r["provision"].is_null())
          std::cout << "provision " << r["provision"]["strategy"].get<std::string>() << " static_transfers "
                    << tl["static_transfers"] << "\n";
        if (show_manifests) std::cout << r["manifests"].get<std::string>();
      }
      return 0;
    }

    if (*get) {
      std::string text;
      const auto r = client.call("GET", get_path, "", {}, &text);
      if (!text.empty()) std::cout << text;
      else print(r);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
