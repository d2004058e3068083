#include "qkernel/backend.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>

#include "qkernel/errors.hpp"
#include "qkernel/io.hpp"

namespace qk {

namespace fs = std::filesystem;

void BackendProfile::validate() const {
    if (basis_gates.empty()) throw ArgumentError("backend '" + name + "' has an empty instruction set");
    if (!(seconds_per_job > 0)) throw ArgumentError("backend '" + name + "' needs seconds_per_job > 0");
    if (max_circuits_per_job == 0) throw ArgumentError("backend '" + name + "' needs max_circuits_per_job >= 1");
    if (queue.value < 0) throw ArgumentError("queue model parameter must be non-negative");
}

BackendProfile builtin_profile(const std::string& name) {
    static const std::map<std::string, double> seconds{
        {"ibm_torino", 15.0}, {"ibm_algiers", 18.0}, {"ibm_cairo", 16.0}, {"ibm_kyoto", 17.0}};
    auto it = seconds.find(name);
    if (it == seconds.end()) throw ArgumentError("unknown backend profile '" + name + "'");
    BackendProfile p;
    p.name = name;
    p.seconds_per_job = it->second;
    return p;
}

std::vector<std::string> builtin_profile_names() {
    return {"ibm_torino", "ibm_algiers", "ibm_cairo", "ibm_kyoto"};
}

std::string_view job_status_name(JobStatus s) {
    switch (s) {
        case JobStatus::Queued: return "queued";
        case JobStatus::Running: return "running";
        case JobStatus::Done: return "done";
        case JobStatus::Failed: return "failed";
    }
    return "?";
}

namespace {

JobStatus job_status_from_name(const std::string& s) {
    for (auto k : {JobStatus::Queued, JobStatus::Running, JobStatus::Done, JobStatus::Failed}) {
        if (job_status_name(k) == s) return k;
    }
    throw FormatError("unknown job status '" + s + "'");
}

std::string job_id(const std::string& session, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "-%06zu", index);
    return session + buf;
}

double queue_wait(const BackendProfile& p) {
    switch (p.queue.kind) {
        case QueueModelKind::Immediate: return 0.0;
        case QueueModelKind::FixedDelay: return p.queue.value;
        case QueueModelKind::LoadFactor: return p.queue.value * p.seconds_per_job;
    }
    return 0.0;
}

}  // namespace

void Job::transition(JobStatus to) {
    const bool ok = (status == JobStatus::Queued && to == JobStatus::Running) ||
                    (status == JobStatus::Running && (to == JobStatus::Done || to == JobStatus::Failed));
    if (!ok) {
        throw ConfigurationError("job " + id + ": illegal status change " +
                                 std::string(job_status_name(status)) + " -> " +
                                 std::string(job_status_name(to)));
    }
    status = to;
}

JobStore::JobStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_ / "jobs"); }

fs::path JobStore::job_path(const std::string& id) const { return root_ / "jobs" / (id + ".json"); }

void JobStore::save(const Job& job) const { io::write_json_atomic(job_path(job.id), job); }

Job JobStore::load(const std::string& id) const {
    const auto p = job_path(id);
    if (!fs::exists(p)) throw FormatError("no job '" + id + "' in " + root_.string());
    return io::read_json(p).get<Job>();
}

bool JobStore::contains(const std::string& id) const { return fs::exists(job_path(id)); }

std::vector<std::string> JobStore::list() const {
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(root_ / "jobs")) {
        if (e.path().extension() == ".json") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

bool JobStore::has_session() const { return fs::exists(root_ / "session.json"); }

void JobStore::save_session(const Session& s) const { io::write_json_atomic(root_ / "session.json", s); }

Session JobStore::load_session() const {
    if (!has_session()) throw FormatError("no session manifest in " + root_.string());
    return io::read_json(root_ / "session.json").get<Session>();
}

SessionLock::SessionLock(const fs::path& root) : path_(root / ".lock") {
    fs::create_directories(root);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw ConfigurationError("session directory " + root.string() +
                                 " is locked by another invocation (remove " + path_.string() +
                                 " if that process is gone)");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

SessionLock::~SessionLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

std::vector<KernelTask> transpile_tasks(std::vector<KernelTask> tasks, const Isa& isa) {
    for (auto& t : tasks) t.circuit = transpile(t.circuit, isa);
    return tasks;
}

std::vector<std::string> submit_kernel_jobs(const std::vector<KernelTask>& tasks,
                                            std::uint64_t shots, JobStore& store,
                                            Session& session, std::size_t circuits_per_job) {
    const auto& profile = session.profile;
    profile.validate();
    if (shots == 0) throw ArgumentError("shots must be at least 1");
    if (tasks.empty()) return {};

    const std::size_t per_job = circuits_per_job == 0 ? tasks.size() : circuits_per_job;
    if (std::min(per_job, tasks.size()) > profile.max_circuits_per_job) {
        throw MaxJobSizeError(std::min(per_job, tasks.size()), profile.max_circuits_per_job);
    }
    for (const auto& t : tasks) {
        if (const Gate* g = first_foreign_gate(t.circuit, profile.basis_gates)) {
            throw IsaViolationError(std::string(gate_name(g->kind)), profile.name);
        }
    }

    std::vector<Job> jobs;
    for (std::size_t start = 0; start < tasks.size(); start += per_job) {
        Job job;
        job.id = job_id(session.id, session.job_ids.size() + jobs.size());
        job.shots = shots;
        job.submitted_at = session.clock_seconds;
        for (std::size_t k = start; k < std::min(tasks.size(), start + per_job); ++k) {
            job.circuits.push_back(tasks[k].circuit);
            job.entries.push_back({tasks[k].kind, tasks[k].row, tasks[k].col, tasks[k].seed});
        }
        jobs.push_back(std::move(job));
    }

    std::vector<std::string> ids;
    for (const auto& job : jobs) {
        if (store.contains(job.id)) throw ConfigurationError("job id collision: " + job.id);
    }
    for (const auto& job : jobs) {
        store.save(job);
        ids.push_back(job.id);
    }
    session.job_ids.insert(session.job_ids.end(), ids.begin(), ids.end());
    store.save_session(session);
    return ids;
}

std::size_t run_pending(JobStore& store, Session& session, const RunOptions& options) {
    const auto& profile = session.profile;
    profile.validate();
    bool budget_reported = options.budget_seconds && session.quantum_seconds > *options.budget_seconds;
    std::size_t completed = 0;
    for (const auto& id : session.job_ids) {
        Job job = store.load(id);
        if (job.status != JobStatus::Queued) continue;

        session.clock_seconds = std::max(session.clock_seconds, job.submitted_at) + queue_wait(profile);
        job.started_at = session.clock_seconds;
        job.transition(JobStatus::Running);
        store.save(job);

        try {
            std::vector<std::uint64_t> zeros;
            zeros.reserve(job.circuits.size());
            for (std::size_t c = 0; c < job.circuits.size(); ++c) {
                const auto& circuit = job.circuits[c];
                if (const Gate* g = first_foreign_gate(circuit, profile.basis_gates)) {
                    throw IsaViolationError(std::string(gate_name(g->kind)), profile.name);
                }
                const auto state = apply_circuit(Statevector(circuit.num_qubits), circuit);
                zeros.push_back(count_all_zeros(state, job.shots, job.entries.at(c).seed));
            }
            job.zeros = std::move(zeros);
            session.clock_seconds += profile.seconds_per_job;
            session.quantum_seconds += profile.seconds_per_job;
            ++session.jobs_done;
            job.completed_at = session.clock_seconds;
            job.transition(JobStatus::Done);
            ++completed;
        } catch (const std::exception& e) {
            job.error = e.what();
            job.completed_at = session.clock_seconds;
            job.transition(JobStatus::Failed);
        }
        store.save(job);

        if (!budget_reported && options.budget_seconds && session.quantum_seconds > *options.budget_seconds) {
            budget_reported = true;
            if (options.on_budget_exceeded) options.on_budget_exceeded(session.quantum_seconds, *options.budget_seconds);
        }
    }
    store.save_session(session);
    return completed;
}

std::map<EntryKey, double> collect_kernel_results(const std::vector<std::string>& job_ids,
                                                  const JobStore& store) {
    std::vector<Job> jobs;
    std::vector<std::string> pending;
    for (const auto& id : job_ids) {
        Job job = store.load(id);
        if (job.status != JobStatus::Done) pending.push_back(id);
        jobs.push_back(std::move(job));
    }
    if (!pending.empty()) throw IncompleteSessionError(std::move(pending));

    std::map<EntryKey, double> out;
    for (const auto& job : jobs) {
        if (job.zeros.size() != job.entries.size()) {
            throw FormatError("job " + job.id + " has " + std::to_string(job.zeros.size()) +
                              " counts for " + std::to_string(job.entries.size()) + " circuits");
        }
        for (std::size_t c = 0; c < job.entries.size(); ++c) {
            const auto& e = job.entries[c];
            out[{e.kind, e.row, e.col}] = static_cast<double>(job.zeros[c]) / static_cast<double>(job.shots);
        }
    }
    return out;
}

// JSON --------------------------------------------------------------------------------------

Session submit_kernel_session(const fs::path& dir, const FeatureMatrix& train, const FeatureMatrix& test,
                              const FeatureMapSpec& spec, const BackendProfile& profile, std::uint64_t shots,
                              std::uint64_t seed, std::size_t circuits_per_job, bool transpile) {
    profile.validate();
    SessionLock lock(dir);
    fs::remove_all(dir / "jobs");
    fs::remove(dir / "session.json");
    JobStore store(dir);

    Session session;
    const std::string hash = spec_hash(spec);
    session.id = "qk" + hash.substr(0, 8);
    session.profile = profile;
    session.config = {{"feature_map", spec}, {"spec_hash", hash},        {"shots", shots},
                      {"seed", seed},        {"n_train", train.rows()}, {"n_test", test.rows()}};

    auto tasks = train_tasks(train, spec, seed);
    if (test.rows() > 0) {
        auto more = test_tasks(test, train, spec, seed);
        tasks.insert(tasks.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    }
    if (transpile) tasks = transpile_tasks(std::move(tasks), profile.basis_gates);
    submit_kernel_jobs(tasks, shots, store, session, circuits_per_job);
    store.save_session(session);  // also covers a single training sample with nothing to submit
    return session;
}

Session run_kernel_session(const fs::path& dir, const RunOptions& options) {
    SessionLock lock(dir);
    JobStore store(dir);
    if (!store.has_session()) throw ArgumentError("no session found in " + dir.string());
    auto session = store.load_session();
    run_pending(store, session, options);
    return session;
}

CollectedKernels collect_kernel_session(const fs::path& dir) {
    SessionLock lock(dir);
    JobStore store(dir);
    if (!store.has_session()) throw ArgumentError("no session found in " + dir.string());
    const auto session = store.load_session();
    const auto entries = collect_kernel_results(session.job_ids, store);
    const auto& cfg = session.config;
    FeatureMapSpec spec;
    std::size_t n_train = 0, n_test = 0;
    ComputeUncompute method;
    try {
        spec = cfg.at("feature_map").get<FeatureMapSpec>();
        n_train = cfg.at("n_train").get<std::size_t>();
        n_test = cfg.at("n_test").get<std::size_t>();
        method.shots = cfg.at("shots").get<std::uint64_t>();
        method.seed = cfg.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("session config is incomplete: " + std::string(e.what()));
    }
    CollectedKernels out{assemble_kernel_matrix(KernelKind::Train, n_train, n_train, entries, spec, method),
                         std::nullopt, session.quantum_seconds};
    if (n_test > 0) out.test = assemble_kernel_matrix(KernelKind::Test, n_test, n_train, entries, spec, method);
    return out;
}

void to_json(nlohmann::json& j, const Circuit& c) {
    j = nlohmann::json::object();
    j["num_qubits"] = c.num_qubits;
    auto gates = nlohmann::json::array();
    for (const auto& g : c.gates) {
        nlohmann::json jg{{"kind", gate_name(g.kind)}, {"targets", g.targets}};
        if (gate_is_parameterized(g.kind)) jg["angle"] = io::format_double(g.angle);
        gates.push_back(std::move(jg));
    }
    j["gates"] = std::move(gates);
}

void from_json(const nlohmann::json& j, Circuit& c) {
    try {
        Circuit out(j.at("num_qubits").get<int>());
        for (const auto& jg : j.at("gates")) {
            Gate g{gate_kind_from_name(jg.at("kind").get<std::string>()), jg.at("targets").get<std::vector<int>>()};
            if (gate_is_parameterized(g.kind)) g.angle = io::parse_double(jg.at("angle").get<std::string>());
            out.gates.push_back(std::move(g));
        }
        c = std::move(out);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid circuit JSON: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const BackendProfile& p) {
    std::vector<std::string> gates;
    for (auto k : p.basis_gates) gates.emplace_back(gate_name(k));
    nlohmann::json q;
    switch (p.queue.kind) {
        case QueueModelKind::Immediate: q = {{"kind", "immediate"}}; break;
        case QueueModelKind::FixedDelay: q = {{"kind", "fixed_delay"}, {"seconds", p.queue.value}}; break;
        case QueueModelKind::LoadFactor: q = {{"kind", "load_factor"}, {"multiplier", p.queue.value}}; break;
    }
    j = {{"name", p.name},
         {"basis_gates", gates},
         {"max_circuits_per_job", p.max_circuits_per_job},
         {"seconds_per_job", p.seconds_per_job},
         {"queue_model", q}};
}

void from_json(const nlohmann::json& j, BackendProfile& p) {
    try {
        BackendProfile out;
        out.name = j.at("name").get<std::string>();
        out.basis_gates.clear();
        for (const auto& g : j.at("basis_gates")) out.basis_gates.insert(gate_kind_from_name(g.get<std::string>()));
        out.max_circuits_per_job = j.at("max_circuits_per_job").get<std::size_t>();
        out.seconds_per_job = j.at("seconds_per_job").get<double>();
        const auto& q = j.at("queue_model");
        const auto kind = q.at("kind").get<std::string>();
        if (kind == "immediate") {
            out.queue = {QueueModelKind::Immediate, 0.0};
        } else if (kind == "fixed_delay") {
            out.queue = {QueueModelKind::FixedDelay, q.at("seconds").get<double>()};
        } else if (kind == "load_factor") {
            out.queue = {QueueModelKind::LoadFactor, q.at("multiplier").get<double>()};
        } else {
            throw FormatError("unknown queue model '" + kind + "'");
        }
        p = std::move(out);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid backend profile JSON: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const Job& job) {
    j = nlohmann::json::object();
    j["id"] = job.id;
    j["status"] = job_status_name(job.status);
    j["shots"] = job.shots;
    j["submitted_at"] = job.submitted_at;
    j["started_at"] = job.started_at ? nlohmann::json(*job.started_at) : nlohmann::json(nullptr);
    j["completed_at"] = job.completed_at ? nlohmann::json(*job.completed_at) : nlohmann::json(nullptr);
    auto entries = nlohmann::json::array();
    for (const auto& e : job.entries) {
        entries.push_back({{"kind", kernel_kind_name(e.kind)}, {"row", e.row}, {"col", e.col}, {"seed", e.seed}});
    }
    j["entries"] = std::move(entries);
    j["circuits"] = job.circuits;
    if (job.status == JobStatus::Done) {
        auto counts = nlohmann::json::array();
        for (auto z : job.zeros) counts.push_back({{"zeros", z}, {"shots", job.shots}});
        j["counts"] = std::move(counts);
    }
    if (job.status == JobStatus::Failed) j["error"] = job.error;
}

void from_json(const nlohmann::json& j, Job& job) {
    try {
        Job out;
        out.id = j.at("id").get<std::string>();
        out.status = job_status_from_name(j.at("status").get<std::string>());
        out.shots = j.at("shots").get<std::uint64_t>();
        out.submitted_at = j.at("submitted_at").get<double>();
        if (!j.at("started_at").is_null()) out.started_at = j["started_at"].get<double>();
        if (!j.at("completed_at").is_null()) out.completed_at = j["completed_at"].get<double>();
        for (const auto& e : j.at("entries")) {
            out.entries.push_back({kernel_kind_from_name(e.at("kind").get<std::string>()), e.at("row").get<std::size_t>(),
                                   e.at("col").get<std::size_t>(), e.at("seed").get<std::uint64_t>()});
        }
        out.circuits = j.at("circuits").get<std::vector<Circuit>>();
        if (out.circuits.size() != out.entries.size()) throw FormatError("job " + out.id + ": circuits/entries length mismatch");
        if (out.status == JobStatus::Done) {
            for (const auto& c : j.at("counts")) out.zeros.push_back(c.at("zeros").get<std::uint64_t>());
        }
        if (out.status == JobStatus::Failed) out.error = j.value("error", std::string{});
        job = std::move(out);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid job JSON: ") + e.what());
    }
}

void to_json(nlohmann::json& j, const Session& s) {
    j = {{"id", s.id},
         {"profile", s.profile},
         {"job_ids", s.job_ids},
         {"clock_seconds", s.clock_seconds},
         {"quantum_seconds", s.quantum_seconds},
         {"quantum_minutes", s.quantum_seconds / 60.0},
         {"jobs_done", s.jobs_done},
         {"config", s.config}};
}

void from_json(const nlohmann::json& j, Session& s) {
    try {
        Session out;
        out.id = j.at("id").get<std::string>();
        out.profile = j.at("profile").get<BackendProfile>();
        out.job_ids = j.at("job_ids").get<std::vector<std::string>>();
        out.clock_seconds = j.at("clock_seconds").get<double>();
        out.quantum_seconds = j.at("quantum_seconds").get<double>();
        out.jobs_done = j.at("jobs_done").get<std::size_t>();
        out.config = j.value("config", nlohmann::json::object());
        s = std::move(out);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("invalid session manifest: ") + e.what());
    }
}

}  // namespace qk
