// Command-line front end: parameter and key generation, model encoding,
// encryption, inference, decryption, op counting and clear/encrypted
// comparison. Reports go to stdout as JSON.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "hear/ckks/backend.hpp"
#include "hear/ckks/serialize.hpp"
#include "hear/costmodel.hpp"
#include "hear/fastpath.hpp"
#include "hear/ingest.hpp"
#include "hear/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hear;

namespace {

constexpr int kExitMismatch = 1;

struct RunConfig {
    std::string net;
    std::string mode;      // empty: key directory config, else fast
    std::string strategy;  // empty: key directory config, else giant
    std::string backend = "sim";
    std::string params;  // profile name or parameter file; empty picks by mode
    int threads = 0;
};

void add_run_options(CLI::App* cmd, RunConfig& rc, bool with_net = true)
{
    if (with_net) cmd->add_option("--net", rc.net, "1d-w64, 1d-w128, 2d-w64, 2d-w128 or a custom id");
    cmd->add_option("--mode", rc.mode, "hear or fast (default fast)");
    cmd->add_option("--strategy", rc.strategy, "full, giant or baby (default giant)");
    cmd->add_option("--params", rc.params, "profile (hear, fast-hear, toy, toy-hear) or parameter file");
}

void fill_defaults(RunConfig& rc, const json* config = nullptr)
{
    if (rc.mode.empty()) rc.mode = config ? config->value("mode", "fast") : "fast";
    if (rc.strategy.empty()) rc.strategy = config ? config->value("strategy", "giant") : "giant";
}

ckks::ParameterSet resolve_params(const RunConfig& rc)
{
    std::string p = rc.params;
    if (p.empty()) p = parse_mode(rc.mode) == Mode::Fast ? "fast-hear" : "hear";
    for (const char* profile : {"hear", "fast-hear", "toy", "toy-hear"})
        if (p == profile) return ckks::gen_params(p);
    if (!fs::is_regular_file(p)) throw ValidationError("unknown parameter profile or file: " + p);
    return ckks::load_params(p);
}

PipelinePlan make_plan(const NetworkShape& shape, const RunConfig& rc, const ckks::ParameterSet& ps)
{
    return compile_pipeline(shape, parse_mode(rc.mode), parse_strategy(rc.strategy), ps.slots(), ps.prime_values(),
                            ps.delta_msg);
}

NetworkShape shape_for(const std::string& net)
{
    if (net.empty()) throw ValidationError("--net is required");
    return NetworkShape::named(net);
}

void write_json(const std::string& path, const json& j)
{
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open for writing: " + path);
    os << j.dump(2) << "\n";
    if (!os) throw ValidationError("write failed: " + path);
}

json read_json(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open: " + path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw ValidationError("malformed JSON in " + path + ": " + e.what());
    }
}

int argmax(const std::vector<double>& v)
{
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

json logits_json(const std::vector<double>& v) { return {{"logits", v}, {"argmax", argmax(v)}}; }

// Key directory: params.json, config.json, public.key, eval.key and,
// unless withheld, secret.key.
struct KeyDir {
    fs::path dir;
    ckks::ParameterSet ps;
    json config;

    explicit KeyDir(const std::string& d) : dir(d)
    {
        if (!fs::is_directory(dir)) throw ValidationError("not a key directory: " + d);
        ps = ckks::load_params((dir / "params.json").string());
        config = read_json((dir / "config.json").string());
    }
    std::string file(const char* name) const { return (dir / name).string(); }
    bool has(const char* name) const { return fs::exists(dir / name); }
};

struct CkksSession {
    std::shared_ptr<const ckks::Context> ctx;
    std::unique_ptr<ckks::CkksBackend> be;
};

CkksSession open_session(const KeyDir& kd, bool need_eval, std::uint64_t seed)
{
    CkksSession s;
    s.ctx = std::make_shared<const ckks::Context>(kd.ps);
    auto keys = std::make_shared<ckks::EvalKeys>();
    if (need_eval) *keys = ckks::load_eval_keys(kd.file("eval.key"), kd.ps);
    std::optional<ckks::SecretKey> sk;
    std::optional<ckks::PublicKey> pk;
    if (kd.has("secret.key")) sk = ckks::load_secret_key(kd.file("secret.key"), kd.ps);
    if (kd.has("public.key")) pk = ckks::load_public_key(kd.file("public.key"), kd.ps);
    s.be = std::make_unique<ckks::CkksBackend>(s.ctx, std::move(keys), std::move(sk), std::move(pk), seed);
    return s;
}

void require_coverage(const ckks::CkksBackend& be, const PipelinePlan& plan)
{
    const auto missing = ckks::missing_rotations(be.context(), be.evaluator().keys(), plan.rotation_keys());
    if (!missing.empty())
        throw CryptoError("rotation keys do not cover the plan (" + std::to_string(missing.size()) +
                          " amounts missing, first " + std::to_string(missing.front()) + ")");
}

// ------------------------------------------------------------------ commands

json cmd_ingest(const std::string& in, const std::string& out, int frames, double threshold)
{
    const JointSequence seq = read_frames_json(in);
    const JointSequence sel = select_frames(seq, frames, threshold);
    const InputTensor x = assemble(normalize(sel));
    write_tensor_json(out, x);
    return {{"frames_in", seq.frames.size()}, {"frames_out", x.frames}, {"joints", x.joints}, {"out", out}};
}

json shape_json(const NetworkShape& s)
{
    return {{"network", s.name()},  {"dim", to_string(s.dim)}, {"frames", s.frames},
            {"joints", s.joints},   {"widths", s.widths},      {"classes", s.classes},
            {"taps", s.taps()}};
}

json cmd_model_random(const std::string& net, std::uint64_t seed, const std::string& out, bool collapsed)
{
    const RawParams raw = random_raw_params(shape_for(net), seed);
    if (collapsed) save_model(out, collapse_layers(raw));
    else save_model(out, raw);
    return {{"out", out}, {"seed", seed}, {"collapsed", collapsed}, {"shape", shape_json(raw.shape)}};
}

json digest_hex(std::uint64_t d)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
    return buf;
}

json cmd_model_inspect(const std::string& path)
{
    const ModelFile m = load_model(path);
    const CollapsedParams& c = m.collapsed;
    json d;
    for (int t = 1; t <= 3; ++t) {
        std::vector<double> coeff;
        for (const auto& a : c.blocks[t - 1].coeff) coeff.insert(coeff.end(), a.begin(), a.end());
        d["conv" + std::to_string(t)] = {{"filters", digest_hex(digest(c.blocks[t - 1].filters))},
                                         {"coefficients", digest_hex(digest(coeff))}};
    }
    d["fc"] = {{"weights", digest_hex(digest(c.fc))}, {"bias", digest_hex(digest(c.fc_bias))}};
    return {{"shape", shape_json(c.shape)}, {"has_raw_layers", m.raw.has_value()}, {"digests", d}};
}

json layout_json(const PackedLayout& l)
{
    return {{"dim", to_string(l.dim)},         {"slots", l.slots},      {"block", l.block},
            {"channels_per_ct", l.channels_per_ct}, {"replicas", l.replicas}, {"true_channels", l.true_channels},
            {"map", {l.map_h, l.map_w}},       {"pitch", l.pitch},      {"stride", l.stride}};
}

json cmd_layout_describe(const std::string& net, int slots)
{
    const NetworkShape shape = shape_for(net);
    json stages = json::array();
    for (int t = 1; t <= 3; ++t) {
        const PackedLayout l = t == 1 ? input_layout(shape, slots) : stage_layout(shape, slots, t);
        json j = layout_json(l);
        j["conv"] = t;
        j["valid_positions"] = l.valid_positions().size();
        stages.push_back(j);
    }
    return {{"network", shape.name()}, {"stages", stages}, {"final", layout_json(stage_layout(shape, slots, 3))}};
}

json counts_json(const std::map<std::string, OpCounts>& m)
{
    json j = json::object();
    OpCounts total;
    for (const auto& [k, v] : m) {
        j[k] = v.to_json();
        j[k].erase("add");
        total += v;
    }
    j["total"] = total.to_json();
    j["total"].erase("add");
    return j;
}

json cmd_plan_show(const RunConfig& rc)
{
    const ckks::ParameterSet ps = resolve_params(rc);
    const PipelinePlan plan = make_plan(shape_for(rc.net), rc, ps);
    json j = plan.to_json();
    j["params"] = ps.profile;
    j["predicted"] = counts_json(predict(plan));
    return j;
}

struct SimRun {
    std::vector<double> logits;
    CostReport report;
};

SimRun run_sim(const CollapsedParams& params, const PipelinePlan& plan, const InputTensor& x, int threads,
               std::vector<ScheduleStep>* trace = nullptr)
{
    SimBackend be(plan.slots, plan.primes, threads);
    const PackedInput packed = pack_input(x, plan.slots, params.shape.dim);
    PipelineResult res;
    const auto out = run_pipeline(be, params, plan, be.encrypt(packed.slots, plan.start_level, plan.delta), &res,
                                  threads);
    if (trace) *trace = res.trace;
    return {extract_logits(be.decrypt(out), plan.final_layout, params.shape.classes), make_report(plan, be.counters())};
}

int cmd_count_ops(const RunConfig& rc, const std::string& format, std::uint64_t seed)
{
    const ckks::ParameterSet ps = resolve_params(rc);
    const NetworkShape shape = shape_for(rc.net);
    const PipelinePlan plan = make_plan(shape, rc, ps);
    const CollapsedParams params = collapse_layers(random_raw_params(shape, seed));
    const SimRun r = run_sim(params, plan, random_input(shape.frames, shape.joints, seed + 1), rc.threads);
    const Verdict v = compare(r.report);
    if (format == "table") {
        std::cout << r.report.to_table();
        std::cout << (v.pass ? "verdict: match\n" : "verdict: MISMATCH\n");
        for (const auto& m : v.mismatches) std::cout << "  " << m << "\n";
    } else {
        json j = r.report.to_json();
        j["pass"] = v.pass;
        j["mismatches"] = v.mismatches;
        j["conv_breakdown"] = v.breakdown;
        std::cout << j.dump(2) << "\n";
    }
    return v.pass ? 0 : kExitMismatch;
}

json cmd_keygen(const RunConfig& rc, const std::string& out_dir, std::uint64_t seed, bool withhold_secret)
{
    const ckks::ParameterSet ps = resolve_params(rc);
    const NetworkShape shape = shape_for(rc.net);
    const PipelinePlan plan = make_plan(shape, rc, ps);
    fs::create_directories(out_dir);
    const fs::path d(out_dir);
    ckks::Context ctx(ps);
    ckks::KeyGenerator kg(ctx, seed);
    const ckks::SecretKey sk = kg.secret_key();
    const ckks::PublicKey pk = kg.public_key(sk);
    const ckks::EvalKeys ek = ckks::make_eval_keys(ctx, kg, sk, plan.rotation_keys());
    ckks::save_params((d / "params.json").string(), ps);
    write_json((d / "config.json").string(),
               {{"network", shape.name()}, {"mode", to_string(plan.mode)}, {"strategy", to_string(plan.strategy)}});
    if (!withhold_secret) ckks::save_secret_key((d / "secret.key").string(), sk, ps);
    ckks::save_public_key((d / "public.key").string(), pk, ps);
    ckks::save_eval_keys((d / "eval.key").string(), ek, ps);
    std::vector<int> amounts;
    for (const auto& [a, k] : ek.galois) amounts.push_back(a);
    return {{"out_dir", out_dir},
            {"params", ps.to_json()},
            {"digest", digest_hex(ps.digest())},
            {"rotation_keys", amounts},
            {"eval_key_bytes", ek.bytes()},
            {"secret_key_written", !withhold_secret}};
}

json cmd_encode_model(const std::string& model, const RunConfig& rc, const std::string& out)
{
    const CollapsedParams params = load_model(model).collapsed;
    const ckks::ParameterSet ps = resolve_params(rc);
    const PipelinePlan plan = make_plan(params.shape, rc, ps);
    const auto inv = plaintext_inventory(plan);
    const EncodingFootprint fp = encoding_footprint(inv, ps.n(), ps.max_level());
    json groups = json::array();
    for (const auto& g : inv)
        groups.push_back({{"kind", g.kind}, {"layer", g.layer}, {"level", g.level}, {"count", g.count}});
    json j = {{"network", params.shape.name()},
              {"mode", to_string(plan.mode)},
              {"strategy", to_string(plan.strategy)},
              {"params", ps.profile},
              {"plaintexts", fp.plaintexts},
              {"level_aware_bytes", fp.level_aware_bytes},
              {"full_level_bytes", fp.full_level_bytes},
              {"ratio", fp.ratio()},
              {"groups", groups}};
    if (!out.empty()) {
        ckks::Context ctx(ps);
        ckks::Encoder enc(ctx);
        ckks::PlaintextWriter w(out, ps);
        std::size_t bytes = 0;
        for_each_plaintext(params, plan, [&](const PlaintextGroup& g, const PlainVector& p) {
            if (p.level != g.level) throw ScheduleError("plaintext level differs from the inventory");
            const ckks::Plaintext pt = enc.encode(p.dense(), p.level, p.scale);
            bytes += pt.data.size() * sizeof(std::uint64_t);
            w.write(pt);
        });
        w.close();
        j["out"] = out;
        j["written_plaintexts"] = w.count();
        j["written_bytes"] = bytes;
    }
    return j;
}

json cmd_encrypt(const std::string& keys, const std::string& input, const std::string& out, std::uint64_t seed)
{
    const KeyDir kd(keys);
    RunConfig rc;
    fill_defaults(rc, &kd.config);
    const NetworkShape shape = shape_for(kd.config.at("network"));
    const PipelinePlan plan = make_plan(shape, rc, kd.ps);
    const InputTensor x = read_tensor_json(input);
    CkksSession s = open_session(kd, false, seed);
    const PackedInput packed = pack_input(x, plan.slots, shape.dim);
    const ckks::Ciphertext ct = s.be->encrypt(packed.slots, plan.start_level, plan.delta);
    ckks::save_ciphertext(out, ct, kd.ps);
    return {{"out", out}, {"level", ct.level()}, {"scale_log2", std::log2(ct.scale())}};
}

struct InferOptions {
    std::string model, input, ciphertext, keys, counters, out, out_ct, trace;
    std::uint64_t seed = 1;
};

json trace_json(const std::vector<ScheduleStep>& t)
{
    json j = json::array();
    for (const auto& s : t) j.push_back({{"step", s.label}, {"level", s.level}, {"scale_log2", std::log2(s.scale)}});
    return j;
}

json cmd_infer(RunConfig rc, const InferOptions& o)
{
    const CollapsedParams params = load_model(o.model).collapsed;
    if (!rc.net.empty() && NetworkShape::named(rc.net).name() != params.shape.name())
        throw ValidationError("--net does not match the model shape " + params.shape.name());
    json report = {{"backend", rc.backend}};
    std::vector<double> logits;
    std::vector<ScheduleStep> trace;
    json counters;
    if (rc.backend == "sim") {
        if (o.input.empty()) throw ValidationError("the sim backend needs --input");
        const ckks::ParameterSet ps = resolve_params(rc);
        const PipelinePlan plan = make_plan(params.shape, rc, ps);
        const SimRun r = run_sim(params, plan, read_tensor_json(o.input), rc.threads, &trace);
        logits = r.logits;
        counters = r.report.to_json();
    } else if (rc.backend == "ckks") {
        if (o.keys.empty()) throw ValidationError("the ckks backend needs --keys");
        const KeyDir kd(o.keys);
        fill_defaults(rc, &kd.config);
        if (!rc.params.empty() && resolve_params(rc).digest() != kd.ps.digest())
            throw CryptoError("--params differs from the key directory's parameters");
        const PipelinePlan plan = make_plan(params.shape, rc, kd.ps);
        CkksSession s = open_session(kd, true, o.seed);
        require_coverage(*s.be, plan);
        ckks::Ciphertext in;
        if (!o.ciphertext.empty()) {
            in = ckks::load_ciphertext(o.ciphertext, kd.ps);
        } else {
            if (o.input.empty()) throw ValidationError("need --input or --ciphertext");
            const PackedInput packed = pack_input(read_tensor_json(o.input), plan.slots, params.shape.dim);
            in = s.be->encrypt(packed.slots, plan.start_level, plan.delta);
        }
        PipelineResult res;
        const ckks::Ciphertext out = run_pipeline(*s.be, params, plan, in, &res, rc.threads);
        trace = res.trace;
        counters = make_report(plan, s.be->counters()).to_json();
        if (!o.out_ct.empty()) {
            ckks::save_ciphertext(o.out_ct, out, kd.ps);
            report["out_ciphertext"] = o.out_ct;
        }
        if (kd.has("secret.key"))
            logits = extract_logits(s.be->decrypt(out), plan.final_layout, params.shape.classes);
        else if (o.out_ct.empty())
            throw ValidationError("no secret key in the key directory: pass --out-ct to keep the result");
    } else {
        throw ValidationError("unknown backend: " + rc.backend);
    }
    report["mode"] = rc.mode;
    report["strategy"] = rc.strategy;
    report["network"] = params.shape.name();
    if (!logits.empty()) {
        report["result"] = logits_json(logits);
        if (!o.out.empty()) write_json(o.out, logits_json(logits));
    }
    if (!o.counters.empty()) write_json(o.counters, counters);
    if (!o.trace.empty()) write_json(o.trace, trace_json(trace));
    report["ladder"] = trace_json(trace);
    return report;
}

json cmd_decrypt(const std::string& keys, const std::string& ciphertext, const std::string& out)
{
    const KeyDir kd(keys);
    if (!kd.has("secret.key")) throw CryptoError("secret key required for decryption");
    const NetworkShape shape = shape_for(kd.config.at("network"));
    CkksSession s = open_session(kd, false, 1);
    const ckks::Ciphertext ct = ckks::load_ciphertext(ciphertext, kd.ps);
    const auto logits = extract_logits(s.be->decrypt(ct), stage_layout(shape, kd.ps.slots(), 3), shape.classes);
    if (!out.empty()) write_json(out, logits_json(logits));
    return logits_json(logits);
}

struct CompareResult {
    json report;
    bool pass = false;
};

CompareResult cmd_compare(RunConfig rc, const InferOptions& o, double tolerance)
{
    const CollapsedParams params = load_model(o.model).collapsed;
    const InputTensor x = read_tensor_json(o.input);
    const std::vector<double> clear = infer_clear(params, x);
    std::vector<double> enc;
    CostReport report;
    if (rc.backend == "sim") {
        const ckks::ParameterSet ps = resolve_params(rc);
        const PipelinePlan plan = make_plan(params.shape, rc, ps);
        SimRun r = run_sim(params, plan, x, rc.threads);
        enc = r.logits;
        report = r.report;
        if (tolerance < 0.0) tolerance = 1e-9;
    } else if (rc.backend == "ckks") {
        std::shared_ptr<const ckks::Context> ctx;
        std::unique_ptr<ckks::CkksBackend> be;
        ckks::ParameterSet ps;
        if (!o.keys.empty()) {
            const KeyDir kd(o.keys);
            fill_defaults(rc, &kd.config);
            ps = kd.ps;
            CkksSession s = open_session(kd, true, o.seed);
            ctx = s.ctx;
            be = std::move(s.be);
        } else {
            ps = resolve_params(rc);
        }
        const PipelinePlan plan = make_plan(params.shape, rc, ps);
        if (!be) {
            ctx = std::make_shared<const ckks::Context>(ps);
            ckks::KeyGenerator kg(*ctx, o.seed);
            ckks::SecretKey sk = kg.secret_key();
            ckks::PublicKey pk = kg.public_key(sk);
            auto ek = std::make_shared<ckks::EvalKeys>(ckks::make_eval_keys(*ctx, kg, sk, plan.rotation_keys()));
            be = std::make_unique<ckks::CkksBackend>(ctx, std::move(ek), std::move(sk), std::move(pk), o.seed + 1);
        }
        require_coverage(*be, plan);
        const PackedInput packed = pack_input(x, plan.slots, params.shape.dim);
        const auto out = run_pipeline(*be, params, plan, be->encrypt(packed.slots, plan.start_level, plan.delta),
                                      nullptr, rc.threads);
        enc = extract_logits(be->decrypt(out), plan.final_layout, params.shape.classes);
        report = make_report(plan, be->counters());
        if (tolerance < 0.0) tolerance = plan.mode == Mode::Fast ? std::ldexp(1.0, -5) : std::ldexp(1.0, -9);
    } else {
        throw ValidationError("unknown backend: " + rc.backend);
    }
    double max_err = 0.0;
    for (std::size_t i = 0; i < clear.size(); ++i) max_err = std::max(max_err, std::abs(clear[i] - enc[i]));
    std::vector<double> sorted = clear;
    std::sort(sorted.rbegin(), sorted.rend());
    const double margin = sorted.size() > 1 ? sorted[0] - sorted[1] : INFINITY;
    const Verdict v = compare(report);
    CompareResult r;
    r.pass = max_err <= tolerance && v.pass;
    r.report = {{"network", params.shape.name()},
                {"backend", rc.backend},
                {"mode", rc.mode},
                {"strategy", rc.strategy},
                {"clear", logits_json(clear)},
                {"encrypted", logits_json(enc)},
                {"max_abs_error", max_err},
                {"tolerance", tolerance},
                {"argmax_agree", argmax(clear) == argmax(enc)},
                {"clear_margin", margin},
                {"margin_exceeds_error", margin > 2.0 * max_err},
                {"counts", report.to_json()},
                {"counts_match", v.pass},
                {"count_mismatches", v.mismatches},
                {"pass", r.pass}};
    return r;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Encrypted action-recognition inference toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key-value configuration file (TOML/INI)");
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: available cores)");

    std::string in, out, model, keys, input, ciphertext, format = "json";
    int frames = 32, slots = 8192;
    double threshold = 5.0, tolerance = -1.0;
    std::uint64_t seed = 1;
    bool collapsed = false, withhold_secret = false;
    RunConfig rc;
    InferOptions io;
    json result;
    int code = 0;

    auto* ingest = app.add_subcommand("ingest", "skeleton frames to a network input tensor");
    ingest->add_option("--in", in, "frames JSON")->required();
    ingest->add_option("--out", out, "tensor JSON")->required();
    ingest->add_option("--frames", frames)->capture_default_str();
    ingest->add_option("--threshold", threshold)->capture_default_str();

    auto* mdl = app.add_subcommand("model", "model files");
    mdl->require_subcommand(1);
    auto* mrandom = mdl->add_subcommand("random", "write a random model");
    mrandom->add_option("--net", rc.net)->required();
    mrandom->add_option("--seed", seed)->capture_default_str();
    mrandom->add_option("--out", out)->required();
    mrandom->add_flag("--collapsed", collapsed, "store collapsed parameters only");
    auto* minspect = mdl->add_subcommand("inspect", "print shape and parameter digests");
    minspect->add_option("--model", model)->required();

    auto* layout = app.add_subcommand("layout", "slot layouts");
    layout->require_subcommand(1);
    auto* ldescribe = layout->add_subcommand("describe", "per-stage packing");
    ldescribe->add_option("--net", rc.net)->required();
    ldescribe->add_option("--slots", slots)->capture_default_str();

    auto* plan = app.add_subcommand("plan", "compiled plans");
    plan->require_subcommand(1);
    auto* pshow = plan->add_subcommand("show", "packing, rotations, ladder and predicted counts");
    add_run_options(pshow, rc);

    auto* count = app.add_subcommand("count-ops", "predicted vs measured operation counts on the simulator");
    add_run_options(count, rc);
    count->add_option("--format", format, "json or table")->check(CLI::IsMember({"json", "table"}));
    count->add_option("--seed", seed)->capture_default_str();

    auto* keygen = app.add_subcommand("keygen", "parameters, keys and rotation keys for a plan");
    add_run_options(keygen, rc);
    keygen->add_option("--out-dir", out)->required();
    keygen->add_option("--seed", seed)->capture_default_str();
    keygen->add_flag("--no-secret", withhold_secret, "do not write the secret key");

    auto* encode = app.add_subcommand("encode-model", "encode the model plaintexts at their scheduled levels");
    encode->add_option("--model", model)->required();
    add_run_options(encode, rc, false);
    encode->add_option("--out", out, "write the encoded plaintexts");

    auto* encrypt = app.add_subcommand("encrypt", "encrypt an input tensor");
    encrypt->add_option("--keys", keys)->required();
    encrypt->add_option("--input", input)->required();
    encrypt->add_option("--out", out)->required();
    encrypt->add_option("--seed", seed)->capture_default_str();

    auto* infer = app.add_subcommand("infer", "run the pipeline");
    add_run_options(infer, rc);
    infer->add_option("--backend", rc.backend, "sim or ckks")->capture_default_str();
    infer->add_option("--model", io.model)->required();
    infer->add_option("--input", io.input, "tensor JSON");
    infer->add_option("--ciphertext", io.ciphertext, "encrypted input (ckks)");
    infer->add_option("--keys", io.keys, "key directory (ckks)");
    infer->add_option("--counters", io.counters, "write operation counters");
    infer->add_option("--trace", io.trace, "write the level/scale trace");
    infer->add_option("--out", io.out, "write logits");
    infer->add_option("--out-ct", io.out_ct, "write the encrypted result (ckks)");
    infer->add_option("--seed", io.seed)->capture_default_str();

    auto* decrypt = app.add_subcommand("decrypt", "decrypt a result ciphertext to logits");
    decrypt->add_option("--keys", keys)->required();
    decrypt->add_option("--ciphertext", ciphertext)->required();
    decrypt->add_option("--out", out);

    auto* cmp = app.add_subcommand("compare", "clear vs encrypted inference");
    add_run_options(cmp, rc);
    cmp->add_option("--backend", rc.backend, "sim or ckks")->capture_default_str();
    cmp->add_option("--model", io.model)->required();
    cmp->add_option("--input", io.input)->required();
    cmp->add_option("--keys", io.keys, "key directory (ckks); fresh keys otherwise");
    cmp->add_option("--seed", io.seed)->capture_default_str();
    cmp->add_option("--tolerance", tolerance, "max |error| (default by backend and mode)");
    cmp->add_option("--out", io.out, "write the report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_exit = app.exit(e);
        return rc_exit == 0 ? 0 : 2;
    }
    rc.threads = threads > 0 ? threads : default_threads();
    const bool keyed = (*infer || *cmp) && !io.keys.empty();
    if (!keyed) fill_defaults(rc);

    try {
        if (*ingest) result = cmd_ingest(in, out, frames, threshold);
        else if (*mrandom) result = cmd_model_random(rc.net, seed, out, collapsed);
        else if (*minspect) result = cmd_model_inspect(model);
        else if (*ldescribe) result = cmd_layout_describe(rc.net, slots);
        else if (*pshow) result = cmd_plan_show(rc);
        else if (*count) return cmd_count_ops(rc, format, seed);
        else if (*keygen) result = cmd_keygen(rc, out, seed, withhold_secret);
        else if (*encode) result = cmd_encode_model(model, rc, out);
        else if (*encrypt) result = cmd_encrypt(keys, input, out, seed);
        else if (*infer) result = cmd_infer(rc, io);
        else if (*decrypt) result = cmd_decrypt(keys, ciphertext, out);
        else if (*cmp) {
            CompareResult r = cmd_compare(rc, io, tolerance);
            result = r.report;
            if (!io.out.empty()) write_json(io.out, result);
            code = r.pass ? 0 : kExitMismatch;
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const CryptoError& e) {
        std::cerr << "crypto error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << result.dump(2) << "\n";
    return code;
}
