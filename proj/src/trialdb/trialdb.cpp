#include "hpo/trialdb.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <limits>

namespace hpo {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view status_name(TrialStatus s) {
  switch (s) {
    case TrialStatus::pending: return "pending";
    case TrialStatus::ok: return "ok";
    case TrialStatus::fail: return "fail";
  }
  return "?";
}

namespace {

TrialStatus parse_status(std::string_view s) {
  if (s == "pending") return TrialStatus::pending;
  if (s == "ok") return TrialStatus::ok;
  if (s == "fail") return TrialStatus::fail;
  throw StoreError("unknown trial status '" + std::string(s) + "'");
}

std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

// flock() wrapper; released on scope exit.
class FileLock {
 public:
  FileLock(int fd, int op) : fd_(fd) {
    while (::flock(fd_, op) != 0) {
      if (errno != EINTR) throw StoreError(errno_text("flock"));
    }
  }
  ~FileLock() { ::flock(fd_, LOCK_UN); }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_;
};

}  // namespace

void check_trial(const Trial& t) {
  if (t.status == TrialStatus::ok) {
    if (!t.loss || !std::isfinite(*t.loss)) throw std::invalid_argument("ok trial requires a finite loss");
  } else if (t.loss) {
    throw std::invalid_argument("only ok trials carry a loss");
  }
  for (const auto& [label, v] : t.assignment)
    if (!std::isfinite(as_real(v))) throw std::invalid_argument("non-finite value for label '" + label + "'");
  if (!t.annotations.is_object()) throw std::invalid_argument("annotations must be an object");
}

std::string to_record(const Trial& t) {
  ordered_json j;
  j["trial_id"] = t.trial_id;
  j["born_order"] = t.born_order;
  j["status"] = status_name(t.status);
  j["seed"] = t.seed;
  if (t.loss) j["loss"] = *t.loss;
  ordered_json a = ordered_json::object();
  for (const auto& [label, v] : t.assignment) std::visit([&](auto x) { a[label] = x; }, v);
  j["assignment"] = std::move(a);
  j["annotations"] = t.annotations;
  return j.dump();
}

Trial from_record(std::string_view line) {
  try {
    const json j = json::parse(line);
    Trial t;
    t.trial_id = j.at("trial_id").get<std::int64_t>();
    t.born_order = j.at("born_order").get<std::int64_t>();
    t.status = parse_status(j.at("status").get<std::string>());
    t.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("loss")) t.loss = j.at("loss").get<double>();
    for (const auto& [label, v] : j.at("assignment").items()) {
      if (v.is_number_integer()) t.assignment[label] = v.get<std::int64_t>();
      else if (v.is_number_float()) t.assignment[label] = v.get<double>();
      else throw StoreError("assignment value for '" + label + "' is not a number");
    }
    t.annotations = j.value("annotations", json::object());
    check_trial(t);
    return t;
  } catch (const json::exception& e) {
    throw StoreError(std::string("malformed trial record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw StoreError(std::string("invalid trial record: ") + e.what());
  }
}

TrialStore::TrialStore() = default;

TrialStore::TrialStore(std::filesystem::path path) : path_(std::move(path)) {
  fd_ = ::open(path_->c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw StoreError(errno_text("cannot open trial store '" + path_->string() + "'"));
  FileLock lock(fd_, LOCK_SH);
  refresh_locked();
}

TrialStore::~TrialStore() {
  if (fd_ >= 0) ::close(fd_);
}

void TrialStore::ingest(Trial t) const {
  if (!born_.insert(t.born_order).second)
    throw StoreError("duplicate born_order " + std::to_string(t.born_order) + " in trial store");
  next_id_ = std::max(next_id_, t.trial_id + 1);
  next_born_ = std::max(next_born_, t.born_order + 1);
  trials_.push_back(std::move(t));
}

void TrialStore::refresh_locked() const {
  if (fd_ < 0) return;
  struct stat st {};
  if (::fstat(fd_, &st) != 0) throw StoreError(errno_text("fstat"));
  const auto end = static_cast<std::uint64_t>(st.st_size);
  if (end <= offset_) return;

  std::string buf(end - offset_, '\0');
  std::size_t got = 0;
  while (got < buf.size()) {
    ssize_t r = ::pread(fd_, buf.data() + got, buf.size() - got, static_cast<off_t>(offset_ + got));
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) throw StoreError(errno_text("read trial store"));
    got += static_cast<std::size_t>(r);
  }
  // Only complete lines are records; a trailing fragment is left for later.
  std::size_t start = 0;
  for (std::size_t nl = buf.find('\n'); nl != std::string::npos; nl = buf.find('\n', start)) {
    std::string_view line(buf.data() + start, nl - start);
    if (!line.empty()) ingest(from_record(line));
    start = nl + 1;
  }
  offset_ += start;
}

std::int64_t TrialStore::append(Trial t) {
  std::lock_guard guard(mu_);
  std::optional<FileLock> lock;
  if (fd_ >= 0) {
    lock.emplace(fd_, LOCK_EX);
    refresh_locked();
    // Anything past the last newline is the remains of a writer that died
    // mid-record while holding the lock.
    struct stat st {};
    if (::fstat(fd_, &st) != 0) throw StoreError(errno_text("fstat"));
    if (static_cast<std::uint64_t>(st.st_size) > offset_ && ::ftruncate(fd_, static_cast<off_t>(offset_)) != 0)
      throw StoreError(errno_text("truncate partial record"));
  }

  check_trial(t);
  t.trial_id = next_id_;
  if (t.born_order < 0) t.born_order = next_born_;
  if (born_.count(t.born_order)) throw std::invalid_argument("born_order " + std::to_string(t.born_order) + " already recorded");

  if (fd_ >= 0) {
    const std::string line = to_record(t) + "\n";
    std::size_t put = 0;
    while (put < line.size()) {
      ssize_t w = ::write(fd_, line.data() + put, line.size() - put);
      if (w < 0 && errno == EINTR) continue;
      if (w <= 0) throw StoreError(errno_text("write trial store"));
      put += static_cast<std::size_t>(w);
    }
    if (::fdatasync(fd_) != 0) throw StoreError(errno_text("sync trial store"));
    offset_ += line.size();
  }
  const std::int64_t id = t.trial_id;
  ingest(std::move(t));
  return id;
}

std::vector<Trial> TrialStore::snapshot() const {
  std::lock_guard guard(mu_);
  if (fd_ >= 0) {
    FileLock lock(fd_, LOCK_SH);
    refresh_locked();
  }
  std::vector<Trial> out = trials_;
  std::sort(out.begin(), out.end(), [](const Trial& a, const Trial& b) { return a.born_order < b.born_order; });
  return out;
}

std::size_t TrialStore::size() const {
  std::lock_guard guard(mu_);
  if (fd_ >= 0) {
    FileLock lock(fd_, LOCK_SH);
    refresh_locked();
  }
  return trials_.size();
}

std::int64_t TrialStore::next_born_order() const {
  std::lock_guard guard(mu_);
  if (fd_ >= 0) {
    FileLock lock(fd_, LOCK_SH);
    refresh_locked();
  }
  return next_born_;
}

std::optional<Trial> best_trial(std::span<const Trial> trials) {
  const Trial* best = nullptr;
  for (const Trial& t : trials) {
    if (t.status != TrialStatus::ok) continue;
    if (!best || *t.loss < *best->loss || (*t.loss == *best->loss && t.born_order < best->born_order)) best = &t;
  }
  if (!best) return std::nullopt;
  return *best;
}

std::optional<Trial> best_trial(const TrialStore& store) {
  auto snap = store.snapshot();
  return best_trial(snap);
}

std::vector<double> best_so_far(std::span<const Trial> trials) {
  std::vector<const Trial*> order;
  for (const Trial& t : trials) order.push_back(&t);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->born_order < b->born_order; });
  std::vector<double> out;
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const Trial* t : order) {
    if (t->status == TrialStatus::ok && (std::isnan(best) || *t->loss < best)) best = *t->loss;
    out.push_back(best);
  }
  return out;
}

}  // namespace hpo
