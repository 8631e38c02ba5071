#include "blockflow/engine.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "blockflow/errors.hpp"
#include "blockflow/kernels.hpp"

namespace blockflow {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0, Clock::time_point t) {
  return std::chrono::duration<double, std::nano>(t - t0).count();
}

struct Message {
  enum class Kind { Op, EndRun, Shutdown };
  Kind kind = Kind::Op;
  std::size_t instr = 0;
};

// Dispatch queue of one worker. The control loop bounds its occupancy.
class Mailbox {
 public:
  std::size_t push(std::span<const Message> batch) {
    std::size_t size;
    {
      std::lock_guard lock(m_);
      q_.insert(q_.end(), batch.begin(), batch.end());
      size = q_.size();
    }
    cv_.notify_one();
    return size;
  }

  Message pop() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return !q_.empty(); });
    Message msg = q_.front();
    q_.pop_front();
    return msg;
  }

  std::optional<Message> try_pop() {
    std::lock_guard lock(m_);
    if (q_.empty()) return std::nullopt;
    Message msg = q_.front();
    q_.pop_front();
    return msg;
  }

  std::size_t size() {
    std::lock_guard lock(m_);
    return q_.size();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<Message> q_;
};

struct DmaCommand {
  enum class Kind { Fetch, WriteBack, Shutdown };
  Kind kind = Kind::Fetch;
  std::size_t instr = 0;
  unsigned buffer = 0;
};

// Copy commands of one worker, executed strictly in issue order. A fetch
// into a buffer queued behind that buffer's write-back therefore waits for
// the write-back to finish.
class DmaQueue {
 public:
  void push(DmaCommand c) {
    {
      std::lock_guard lock(m_);
      q_.push_back(c);
    }
    cv_.notify_one();
  }

  DmaCommand pop() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return !q_.empty(); });
    DmaCommand c = q_.front();
    q_.pop_front();
    return c;
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<DmaCommand> q_;
};

template <class T>
void wait_at_least(std::atomic<T>& a, T target) {
  T v = a.load(std::memory_order_acquire);
  while (v < target) {
    a.wait(v, std::memory_order_acquire);
    v = a.load(std::memory_order_acquire);
  }
}

// Per-run state shared by the control loop, workers and transfer agents.
struct RunContext {
  virtual ~RunContext() = default;
  virtual void fetch(std::size_t worker, std::size_t instr, unsigned buffer) = 0;
  virtual void execute(std::size_t worker, std::size_t instr, unsigned in, unsigned out) = 0;
  virtual void write_back(std::size_t worker, std::size_t instr, unsigned buffer) = 0;

  double now() const { return since(t0, Clock::now()); }

  void fail(std::size_t instr, const std::string& what) {
    std::lock_guard lock(error_mutex);
    if (!failed.load(std::memory_order_relaxed)) {
      error_instr = instr;
      error_what = what;
      failed.store(true, std::memory_order_release);
    }
  }

  Clock::time_point t0;
  std::vector<InstructionRecord> records;
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::size_t error_instr = 0;
  std::string error_what;
};

struct WorkerSlot {
  Mailbox mailbox;
  DmaQueue dma;
  std::atomic<std::uint64_t> fetched{0};
  std::atomic<std::uint64_t> written{0};  // completion board entry
  std::uint64_t fetch_issued = 0;         // worker-local
  std::uint64_t wb_issued = 0;            // worker-local
  WorkerIdle idle;
  std::vector<float> fbuf[3];
  std::vector<double> dbuf[3];
  std::thread worker;
  std::thread agent;
};

template <class T>
std::vector<T>* buffers_of(WorkerSlot& w);
template <>
std::vector<float>* buffers_of<float>(WorkerSlot& w) {
  return w.fbuf;
}
template <>
std::vector<double>* buffers_of<double>(WorkerSlot& w) {
  return w.dbuf;
}

}  // namespace

struct Engine::Impl {
  std::vector<std::unique_ptr<WorkerSlot>> slots;
  std::atomic<std::uint64_t> epoch{0};
  std::atomic<RunContext*> ctx{nullptr};
  std::atomic<std::size_t> quiesced{0};
  std::mutex run_mutex;

  void bump() {
    epoch.fetch_add(1, std::memory_order_release);
    epoch.notify_all();
  }

  void worker_loop(std::size_t k);
  void agent_loop(std::size_t k);
};

void Engine::Impl::agent_loop(std::size_t k) {
  WorkerSlot& w = *slots[k];
  for (;;) {
    DmaCommand c = w.dma.pop();
    if (c.kind == DmaCommand::Kind::Shutdown) return;
    RunContext* run = ctx.load(std::memory_order_acquire);
    if (c.kind == DmaCommand::Kind::Fetch) {
      run->fetch(k, c.instr, c.buffer);
      w.fetched.fetch_add(1, std::memory_order_release);
      w.fetched.notify_all();
    } else {
      run->write_back(k, c.instr, c.buffer);
      w.written.fetch_add(1, std::memory_order_release);
      w.written.notify_all();
      bump();
    }
  }
}

void Engine::Impl::worker_loop(std::size_t k) {
  WorkerSlot& w = *slots[k];
  std::uint64_t i = 0;
  std::optional<std::size_t> cur;
  std::uint64_t cur_ticket = 0;
  bool end_pending = false;

  auto issue_fetch = [&](RunContext* run, std::size_t instr, unsigned buffer) {
    InstructionRecord& r = run->records[instr];
    r.received = run->now();
    r.worker = k;
    r.buffer_in = buffer;
    r.df_issue = r.received;
    w.dma.push({DmaCommand::Kind::Fetch, instr, buffer});
    return ++w.fetch_issued;
  };

  auto end_run = [&](RunContext* run) {
    auto t = Clock::now();
    wait_at_least(w.written, w.wb_issued);
    w.idle.dma_ns += since(t, Clock::now());
    w.idle.wall_ns = run->now();
    i = 0;
    end_pending = false;
    quiesced.fetch_add(1, std::memory_order_release);
    quiesced.notify_all();
  };

  for (;;) {
    const unsigned in = i % 3, next = (i + 1) % 3, out = (i + 2) % 3;
    if (!cur) {
      auto t = Clock::now();
      Message m = w.mailbox.pop();
      if (m.kind == Message::Kind::Shutdown) {
        w.dma.push({DmaCommand::Kind::Shutdown, 0, 0});
        return;
      }
      RunContext* run = ctx.load(std::memory_order_acquire);
      w.idle.task_ns += since(std::max(t, run->t0), Clock::now());
      bump();
      if (m.kind == Message::Kind::EndRun) {
        end_run(run);
        continue;
      }
      cur = m.instr;
      cur_ticket = issue_fetch(run, m.instr, in);
    }
    RunContext* run = ctx.load(std::memory_order_acquire);

    // Prefetch only what is already queued: waiting here could block on an
    // instruction whose operands depend on the current one.
    std::optional<std::size_t> nxt;
    std::uint64_t nxt_ticket = 0;
    if (!end_pending) {
      if (auto m = w.mailbox.try_pop()) {
        bump();
        if (m->kind == Message::Kind::Op) {
          nxt = m->instr;
          nxt_ticket = issue_fetch(run, m->instr, next);
        } else {
          end_pending = true;
        }
      }
    }

    auto t = Clock::now();
    wait_at_least(w.fetched, cur_ticket);
    auto t_ex = Clock::now();
    w.idle.dma_ns += since(t, t_ex);

    InstructionRecord& r = run->records[*cur];
    r.buffer_out = out;
    r.ex_start = since(run->t0, t_ex);
    try {
      run->execute(k, *cur, in, out);
    } catch (const std::exception& e) {
      run->fail(*cur, e.what());
    }
    auto t_done = Clock::now();
    r.ex_end = since(run->t0, t_done);
    w.idle.busy_ns += since(t_ex, t_done);

    r.wb_issue = run->now();
    w.dma.push({DmaCommand::Kind::WriteBack, *cur, out});
    ++w.wb_issued;

    ++i;
    cur = nxt;
    cur_ticket = nxt_ticket;
    if (!cur && end_pending) end_run(run);
  }
}

namespace {

template <class T>
class RunState final : public RunContext {
 public:
  struct Source {
    const T* ptr = nullptr;
    std::size_t stride = 0;
    Shape shape;
  };
  struct Plan {
    Opcode op = Opcode::MAdd;
    std::optional<T> scalar;
    Source src[2];
    unsigned distinct = 0;
    unsigned slot[2] = {0, 0};
    unsigned slots = 0;
    T* dst = nullptr;
    Shape out;
    Shape valid;
  };

  RunState(const LoweredGraph& lg, const CostedGraph& cg, const ConstantMap& constants,
           const EngineConfig& cfg, std::vector<std::unique_ptr<WorkerSlot>>& slots)
      : lg_(lg), S_(cfg.buffer_elems), fault_(cfg.inject_fault_at) {
    std::vector<std::size_t> offset(lg.size(), SIZE_MAX);
    std::size_t total = 0;
    for (std::size_t i = 0; i < cg.size(); ++i) {
      const LoweredNode& n = lg.node(cg.lowered_id(i));
      offset[n.id] = total;
      total += n.out_shape.rows * n.out_shape.cols;
    }
    arena_.assign(total, T{0});
    offset_ = offset;

    plans_.resize(cg.size());
    for (std::size_t i = 0; i < cg.size(); ++i) {
      const LoweredNode& n = lg.node(cg.lowered_id(i));
      Plan& p = plans_[i];
      p.op = n.op;
      if (n.scalar) p.scalar = static_cast<T>(*n.scalar);
      p.dst = arena_.data() + offset[n.id];
      p.out = n.out_shape;
      p.valid = n.valid;
      std::vector<LoweredId> distinct = lg.distinct_operands(n.id);
      if (distinct.size() > 2 || n.operands.size() > 2) {
        throw InvariantError("block instruction with more than two operands");
      }
      p.distinct = static_cast<unsigned>(distinct.size());
      for (unsigned d = 0; d < p.distinct; ++d) p.src[d] = source(distinct[d], constants, offset);
      p.slots = static_cast<unsigned>(n.operands.size());
      for (unsigned s = 0; s < p.slots; ++s) {
        p.slot[s] = static_cast<unsigned>(
            std::find(distinct.begin(), distinct.end(), n.operands[s]) - distinct.begin());
      }
    }

    for (auto& slot : slots) {
      std::vector<T>* bufs = buffers_of<T>(*slot);
      std::array<T*, 3> ptrs{};
      for (unsigned b = 0; b < 3; ++b) {
        if (bufs[b].size() < 2 * S_) bufs[b].assign(2 * S_, T{0});
        ptrs[b] = bufs[b].data();
      }
      buffers_.push_back(ptrs);
    }
  }

  void fetch(std::size_t worker, std::size_t instr, unsigned buffer) override {
    const Plan& p = plans_[instr];
    InstructionRecord& r = records[instr];
    auto t_start = Clock::now();
    r.df_start = since(t0, t_start);
    auto t_prev = t_start;
    for (unsigned d = 0; d < p.distinct; ++d) {
      const Source& s = p.src[d];
      T* dst = buffers_[worker][buffer] + d * S_;
      for (std::size_t row = 0; row < s.shape.rows; ++row) {
        std::memcpy(dst + row * s.shape.cols, s.ptr + row * s.stride, s.shape.cols * sizeof(T));
      }
      auto t = Clock::now();
      r.df_operand_ns[d] = since(t_prev, t);
      t_prev = t;
    }
    r.df_end = since(t0, t_prev);
  }

  void execute(std::size_t worker, std::size_t instr, unsigned in, unsigned out) override {
    if (fault_ && *fault_ == instr) throw std::runtime_error("injected kernel fault");
    const Plan& p = plans_[instr];
    const T* ptrs[2];
    Shape shapes[2];
    for (unsigned s = 0; s < p.slots; ++s) {
      ptrs[s] = buffers_[worker][in] + p.slot[s] * S_;
      shapes[s] = p.src[p.slot[s]].shape;
    }
    T* dst = buffers_[worker][out];
    execute_block_op<T>(p.op, std::span<const T* const>(ptrs, p.slots),
                        std::span<const Shape>(shapes, p.slots), p.scalar, dst, p.out);
    // Kernels may turn zero pads into non-zeros (cos, x + s, 0/0, inf * 0).
    for (std::size_t row = 0; row < p.out.rows; ++row) {
      T* line = dst + row * p.out.cols;
      const std::size_t from = row < p.valid.rows ? p.valid.cols : 0;
      std::fill(line + from, line + p.out.cols, T{0});
    }
  }

  void write_back(std::size_t worker, std::size_t instr, unsigned buffer) override {
    const Plan& p = plans_[instr];
    InstructionRecord& r = records[instr];
    r.wb_start = now();
    std::memcpy(p.dst, buffers_[worker][buffer], p.out.rows * p.out.cols * sizeof(T));
    r.wb_end = now();
  }

  Matrix assemble(const BlockGrid& grid, std::size_t divisor) const {
    Matrix m(precision_of<T>(), grid.logical.rows, grid.logical.cols, divisor);
    auto dst = m.storage<T>();
    const std::size_t ld = m.padded_cols();
    for (std::size_t bi = 0; bi < grid.part.p; ++bi) {
      for (std::size_t bj = 0; bj < grid.part.q; ++bj) {
        const LoweredNode& n = lg_.node(grid.at(bi, bj));
        if (!n.is_op()) throw InvariantError("op result grid holds a constant block");
        const T* src = arena_.data() + offset_[n.id];
        const std::size_t r0 = grid.part.row_offset(bi), c0 = grid.part.col_offset(bj);
        for (std::size_t row = 0; row < n.out_shape.rows; ++row) {
          std::memcpy(&dst[(r0 + row) * ld + c0], src + row * n.out_shape.cols,
                      n.out_shape.cols * sizeof(T));
        }
      }
    }
    return m;
  }

 private:
  Source source(LoweredId id, const ConstantMap& constants,
                const std::vector<std::size_t>& offset) const {
    const LoweredNode& n = lg_.node(id);
    if (n.is_op()) return {arena_.data() + offset[id], n.out_shape.cols, n.out_shape};
    auto it = constants.find(n.origin);
    if (it == constants.end() || !it->second) {
      throw std::invalid_argument("no matrix supplied for constant node " +
                                  std::to_string(n.origin));
    }
    const Matrix& m = *it->second;
    if (!m.contains(n.view)) {
      throw std::invalid_argument("constant block outside matrix " + std::to_string(n.origin));
    }
    const T* base = m.storage<T>().data();
    return {base + n.view.row_start * m.padded_cols() + n.view.col_start, m.padded_cols(),
            n.out_shape};
  }

  const LoweredGraph& lg_;
  std::size_t S_;
  std::optional<std::size_t> fault_;
  std::vector<T> arena_;
  std::vector<std::size_t> offset_;
  std::vector<Plan> plans_;
  std::vector<std::array<T*, 3>> buffers_;
};

void check_inputs(const LoweredGraph& lg, const CostedGraph& cg, const Schedule& s,
                  const ConstantMap& constants, const EngineConfig& cfg) {
  if (s.streams.size() > cfg.workers) {
    throw std::invalid_argument("schedule uses " + std::to_string(s.streams.size()) +
                                " workers, engine has " + std::to_string(cfg.workers));
  }
  std::vector<int> seen(cg.size(), 0);
  for (const auto& st : s.streams) {
    for (std::size_t i : st) {
      if (i >= cg.size() || seen[i]++) {
        throw std::invalid_argument("schedule streams are not a partition of the instructions");
      }
    }
  }
  if (std::count(seen.begin(), seen.end(), 1) != static_cast<std::ptrdiff_t>(cg.size())) {
    throw std::invalid_argument("schedule does not cover every instruction");
  }
  for (const LoweredNode& n : lg.nodes()) {
    if (n.out_shape.rows * n.out_shape.cols > cfg.buffer_elems) {
      throw std::invalid_argument("lowered block exceeds the staging buffer capacity");
    }
  }
  for (const auto& [id, m] : constants) {
    if (m && (m->precision() != cfg.precision || m->divisor() != cfg.divisor)) {
      throw std::invalid_argument("constant " + std::to_string(id) +
                                  " differs from the engine precision or divisor");
    }
  }
}

}  // namespace

Engine::Engine(EngineConfig config) : config_(config), impl_(std::make_unique<Impl>()) {
  if (config_.workers == 0) throw std::invalid_argument("engine needs at least one worker");
  if (config_.mailbox_capacity == 0) throw std::invalid_argument("mailbox capacity must be >= 1");
  for (std::size_t k = 0; k < config_.workers; ++k) {
    impl_->slots.push_back(std::make_unique<WorkerSlot>());
  }
  for (std::size_t k = 0; k < config_.workers; ++k) {
    impl_->slots[k]->agent = std::thread([this, k] { impl_->agent_loop(k); });
    impl_->slots[k]->worker = std::thread([this, k] { impl_->worker_loop(k); });
  }
}

Engine::~Engine() {
  Message stop{Message::Kind::Shutdown, 0};
  for (auto& slot : impl_->slots) slot->mailbox.push(std::span<const Message>(&stop, 1));
  for (auto& slot : impl_->slots) {
    slot->worker.join();
    slot->agent.join();
  }
}

EngineResult Engine::run(const LoweredGraph& lg, const CostedGraph& cg,
                         const Schedule& schedule, const ConstantMap& constants,
                         std::span<const NodeId> outputs) {
  std::lock_guard run_lock(impl_->run_mutex);
  check_inputs(lg, cg, schedule, constants, config_);

  return visit_precision(config_.precision, [&](auto tag) -> EngineResult {
    using T = decltype(tag);
    const std::size_t n = cg.size();
    const std::size_t p = config_.workers;
    auto& slots = impl_->slots;

    RunState<T> state(lg, cg, constants, config_, slots);
    state.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      state.records[i].instruction = i;
      state.records[i].lowered = cg.lowered_id(i);
      state.records[i].op = cg.opcode(i);
    }
    std::vector<std::size_t> guard(n);
    for (std::size_t i = 0; i < n; ++i) guard[i] = cg.predecessors(i).size();

    std::vector<std::uint64_t> board_base(p);
    for (std::size_t k = 0; k < p; ++k) {
      slots[k]->idle = WorkerIdle{};
      board_base[k] = slots[k]->written.load(std::memory_order_acquire);
    }
    impl_->quiesced.store(0, std::memory_order_relaxed);
    state.t0 = Clock::now();
    impl_->ctx.store(&state, std::memory_order_release);

    RunReport report;
    report.max_mailbox.assign(p, 0);
    std::vector<std::size_t> dispatched(p, 0), seen(p, 0);
    std::size_t completed = 0, in_flight = 0;
    static const std::vector<std::size_t> kNoStream;
    auto stream = [&](std::size_t k) -> const std::vector<std::size_t>& {
      return k < schedule.streams.size() ? schedule.streams[k] : kNoStream;
    };

    std::vector<Message> batch;
    while (completed < n) {
      const std::uint64_t epoch = impl_->epoch.load(std::memory_order_acquire);
      bool progress = false;
      const bool failed = state.failed.load(std::memory_order_acquire);

      for (std::size_t k = 0; k < p && !failed; ++k) {
        const auto& st = stream(k);
        std::size_t room = config_.mailbox_capacity - std::min(config_.mailbox_capacity,
                                                               slots[k]->mailbox.size());
        batch.clear();
        while (room > 0 && dispatched[k] < st.size() && guard[st[dispatched[k]]] == 0) {
          if (config_.isolate_ops && in_flight + batch.size() > 0) break;
          const std::size_t i = st[dispatched[k]++];
          state.records[i].dispatch = state.now();
          batch.push_back({Message::Kind::Op, i});
          --room;
        }
        if (!batch.empty()) {
          in_flight += batch.size();
          std::size_t occ = slots[k]->mailbox.push(batch);
          report.max_mailbox[k] = std::max(report.max_mailbox[k], occ);
          progress = true;
        }
      }

      for (std::size_t k = 0; k < p; ++k) {
        const std::uint64_t done =
            slots[k]->written.load(std::memory_order_acquire) - board_base[k];
        while (seen[k] < done) {
          const std::size_t i = stream(k)[seen[k]++];
          state.records[i].observed = state.now();
          for (std::size_t j : cg.successors(i)) --guard[j];
          ++completed;
          --in_flight;
          progress = true;
        }
      }

      if (state.failed.load(std::memory_order_acquire) && in_flight == 0) break;
      if (completed == n || progress) continue;
      if (config_.instrumented) {
        std::this_thread::yield();
      } else {
        impl_->epoch.wait(epoch, std::memory_order_acquire);
      }
    }

    Message end{Message::Kind::EndRun, 0};
    for (auto& slot : slots) slot->mailbox.push(std::span<const Message>(&end, 1));
    wait_at_least(impl_->quiesced, p);
    report.wall_ns = state.now();
    impl_->ctx.store(nullptr, std::memory_order_release);

    if (state.failed.load(std::memory_order_acquire)) {
      throw EngineError("instruction " + std::to_string(state.error_instr) + " failed: " +
                            state.error_what,
                        state.error_instr);
    }

    for (const auto& r : state.records) report.makespan_ns = std::max(report.makespan_ns, r.wb_end);
    for (auto& slot : slots) report.idle.push_back(slot->idle);
    report.instructions = std::move(state.records);

    EngineResult result;
    auto emit = [&](NodeId origin) {
      const BlockGrid& grid = lg.result_map().at(origin);
      if (grid.ids.empty() || !lg.node(grid.ids.front()).is_op()) return;
      result.values.emplace(origin, state.assemble(grid, config_.divisor));
    };
    if (outputs.empty()) {
      for (const auto& [origin, grid] : lg.result_map()) emit(origin);
    } else {
      for (NodeId origin : outputs) emit(origin);
    }
    result.report = std::move(report);
    return result;
  });
}

}  // namespace blockflow
