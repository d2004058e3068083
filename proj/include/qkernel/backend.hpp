#pragma once

// Mock quantum-cloud backend.
//
// Kernel entries are submitted as jobs into a directory-backed store, executed later by
// run_pending on the statevector engine, and collected into kernel entries by a separate
// call (possibly from another process). Jobs must already be transpiled to the profile's
// instruction set, and no job may exceed the profile's circuit limit.
//
// Store layout:
//   <root>/session.json        manifest: profile, job ids, simulated clock totals, config
//   <root>/jobs/<job id>.json  one file per job, written via temp file + rename
//   <root>/.lock               present while a process holds the session

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qkernel/kernel.hpp"
#include "qkernel/transpiler.hpp"

namespace qk {

enum class QueueModelKind { Immediate, FixedDelay, LoadFactor };

/// FixedDelay: `value` seconds of waiting before each job starts.
/// LoadFactor: waiting of `value` x seconds_per_job before each job.
struct QueueModel {
    QueueModelKind kind = QueueModelKind::Immediate;
    double value = 0.0;
};

struct BackendProfile {
    std::string name;
    Isa basis_gates = default_isa();
    std::size_t max_circuits_per_job = 300;
    double seconds_per_job = 15.0;
    QueueModel queue;

    void validate() const;
};

/// Named after the systems in the hardware experiments: ibm_torino (15 s/job),
/// ibm_algiers (18 s), ibm_cairo (16 s), ibm_kyoto (17 s).
BackendProfile builtin_profile(const std::string& name);
std::vector<std::string> builtin_profile_names();

enum class JobStatus { Queued, Running, Done, Failed };

std::string_view job_status_name(JobStatus s);

/// Which kernel entry a job circuit estimates, and the seed its shots are drawn with.
struct JobEntry {
    KernelKind kind;
    std::size_t row;
    std::size_t col;
    std::uint64_t seed;
};

struct Job {
    std::string id;
    std::vector<Circuit> circuits;
    std::vector<JobEntry> entries;  // parallel to circuits
    std::uint64_t shots = kDefaultShots;
    JobStatus status = JobStatus::Queued;
    std::vector<std::uint64_t> zeros;  // per circuit; non-empty iff Done
    std::string error;                 // iff Failed
    double submitted_at = 0.0;
    std::optional<double> started_at;
    std::optional<double> completed_at;

    /// Enforces Queued -> Running -> {Done, Failed}.
    void transition(JobStatus to);
};

struct Session {
    std::string id;
    BackendProfile profile;
    std::vector<std::string> job_ids;
    double clock_seconds = 0.0;
    double quantum_seconds = 0.0;
    std::size_t jobs_done = 0;
    /// Saved configuration for the collect phase (feature map, shapes, seeds, ...).
    nlohmann::json config = nlohmann::json::object();
};

class JobStore {
public:
    /// Opens (creating if needed) a store rooted at `root`.
    explicit JobStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    void save(const Job& job) const;
    Job load(const std::string& id) const;
    bool contains(const std::string& id) const;
    std::vector<std::string> list() const;

    bool has_session() const;
    void save_session(const Session& s) const;
    Session load_session() const;

private:
    std::filesystem::path job_path(const std::string& id) const;

    std::filesystem::path root_;
};

/// Exclusive ownership of a session directory for the lifetime of the object.
class SessionLock {
public:
    explicit SessionLock(const std::filesystem::path& root);
    ~SessionLock();
    SessionLock(const SessionLock&) = delete;
    SessionLock& operator=(const SessionLock&) = delete;

private:
    std::filesystem::path path_;
};

/// Transpiles every task circuit to `isa`.
std::vector<KernelTask> transpile_tasks(std::vector<KernelTask> tasks, const Isa& isa);

/// Submits tasks as Queued jobs in the session, `circuits_per_job` circuits per job
/// (1 = one job per kernel entry, 0 = everything in a single job). Validation happens before
/// anything is written, so a rejected submission leaves the store untouched.
std::vector<std::string> submit_kernel_jobs(const std::vector<KernelTask>& tasks,
                                            std::uint64_t shots, JobStore& store,
                                            Session& session, std::size_t circuits_per_job = 1);

struct RunOptions {
    /// Quantum-time budget in seconds; `on_budget_exceeded` fires once when crossed.
    std::optional<double> budget_seconds;
    std::function<void(double used, double budget)> on_budget_exceeded;
};

/// Executes every Queued job of the session in submission order. Returns the number of
/// jobs that completed successfully.
std::size_t run_pending(JobStore& store, Session& session, const RunOptions& options = {});

/// Entry fidelities (zeros / shots) of Done jobs. Throws IncompleteSessionError listing
/// every referenced job that is not Done.
std::map<EntryKey, double> collect_kernel_results(const std::vector<std::string>& job_ids,
                                                  const JobStore& store);

/// Directory-level phases used by the command line; each holds the session lock while it works.
///
/// Replaces any session already in `dir`, then submits the strict upper triangle of the train
/// matrix and, when `test` is non-empty, every test entry. The feature map, shapes, shots and
/// seed are kept in the session config for the collect phase. With `transpile` false the raw
/// feature-map circuits are submitted, which the backend rejects unless they fit its ISA.
Session submit_kernel_session(const std::filesystem::path& dir, const FeatureMatrix& train,
                              const FeatureMatrix& test, const FeatureMapSpec& spec,
                              const BackendProfile& profile, std::uint64_t shots, std::uint64_t seed,
                              std::size_t circuits_per_job = 1, bool transpile = true);
Session run_kernel_session(const std::filesystem::path& dir, const RunOptions& options = {});

struct CollectedKernels {
    KernelMatrix train;
    std::optional<KernelMatrix> test;
    double quantum_seconds = 0.0;
};

/// Throws IncompleteSessionError while any job is not Done.
CollectedKernels collect_kernel_session(const std::filesystem::path& dir);

void to_json(nlohmann::json& j, const Circuit& c);
void from_json(const nlohmann::json& j, Circuit& c);
void to_json(nlohmann::json& j, const BackendProfile& p);
void from_json(const nlohmann::json& j, BackendProfile& p);
void to_json(nlohmann::json& j, const Job& job);
void from_json(const nlohmann::json& j, Job& job);
void to_json(nlohmann::json& j, const Session& s);
void from_json(const nlohmann::json& j, Session& s);

}  // namespace qk
