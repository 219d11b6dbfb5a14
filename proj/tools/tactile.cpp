// Command-line front end for the MIDI-to-haptics pipeline.
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tactile/eval.hpp"
#include "tactile/mapping.hpp"
#include "tactile/midi.hpp"
#include "tactile/profile.hpp"
#include "tactile/serial.hpp"
#include "tactile/timeline.hpp"
#include "tactile/transport.hpp"

namespace fs = std::filesystem;
using namespace tactile;

#ifndef TACTILE_PROFILE_DIR
#define TACTILE_PROFILE_DIR ""
#endif

namespace {

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Resolves a profile argument: a path as-is, or a preset name searched
/// in $TACTILE_PROFILE_PATH then the installed preset directory.
mapping::MappingProfile resolve_profile(const std::string& arg) {
    if (arg.empty()) return mapping::MappingProfile{};
    if (fs::exists(arg)) return profile::load_profile(arg);
    if (arg.find('/') == std::string::npos) {
        std::vector<std::string> dirs;
        if (const char* env = std::getenv("TACTILE_PROFILE_PATH")) {
            std::stringstream ss(env);
            std::string d;
            while (std::getline(ss, d, ':'))
                if (!d.empty()) dirs.push_back(d);
        }
        dirs.push_back(TACTILE_PROFILE_DIR);
        for (const auto& dir : dirs) {
            if (dir.empty()) continue;
            fs::path candidate = fs::path(dir) / (arg + ".json");
            if (fs::exists(candidate)) return profile::load_profile(candidate.string());
        }
    }
    throw DataError("profile not found: " + arg);
}

struct Rendered {
    mapping::RenderResult result;
    std::vector<timeline::DeviceCommand> commands;
};

Rendered render_file(const std::string& midi_path, const mapping::MappingProfile& prof) {
    auto bytes = read_file(midi_path);
    auto doc = midi::parse_smf(bytes);
    auto tempo = midi::build_tempo_map(doc);
    auto events = midi::merge_tracks(doc);
    Rendered r;
    r.result = mapping::render_timeline(events, tempo, doc.ticks_per_quarter, prof);
    r.commands = timeline::arbitrate(r.result.timeline);
    return r;
}

void print_diagnostics(const mapping::Diagnostics& d) {
    auto note = [](const char* what, uint64_t n) {
        if (n) std::cerr << "note: " << n << " " << what << "\n";
    };
    note("notes clamped to the nearest octave band", d.clamped_octaves);
    note("notes clamped into the bass window", d.clamped_bass_notes);
    note("percussion notes with no table entry", d.unmapped_percussion);
    note("note-offs with no matching note-on", d.unmatched_note_off);
    note("note-ons closed at end of song", d.unclosed_note_on);
    note("events on channels with no role", d.ignored_channel_events);
}

/// Backend wrapper that records emission times from the playback clock,
/// so `play --backend log:` produces the same file format as `render`.
class TimedLogBackend : public timeline::Backend {
public:
    explicit TimedLogBackend(timeline::Clock& clock) : clock_(clock) {}
    bool write(layout::ActuatorSite site, uint8_t intensity) override {
        commands_.push_back({clock_.now(), site, intensity});
        return true;
    }
    const std::vector<timeline::DeviceCommand>& commands() const { return commands_; }

private:
    timeline::Clock& clock_;
    std::vector<timeline::DeviceCommand> commands_;
};

class SerialFrameBackend : public timeline::Backend {
public:
    explicit SerialFrameBackend(transport::SerialPort& port) : port_(port) {}
    bool write(layout::ActuatorSite site, uint8_t intensity) override {
        auto frame = transport::encode_frame(site, intensity);
        return port_.write_bytes(frame.data(), frame.size());
    }

private:
    transport::SerialPort& port_;
};

struct BackendSpec {
    enum class Kind { Null, Log, Serial } kind = Kind::Null;
    std::string target;
};

BackendSpec parse_backend(const std::string& arg) {
    if (arg == "null") return {BackendSpec::Kind::Null, ""};
    if (arg.rfind("log:", 0) == 0) return {BackendSpec::Kind::Log, arg.substr(4)};
    if (arg.rfind("serial:", 0) == 0) return {BackendSpec::Kind::Serial, arg.substr(7)};
    throw CLI::ValidationError("--backend", "expected null, log:<path> or serial:<port>");
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

int cmd_render(const std::string& input, const std::string& profile_arg,
               const std::string& output) {
    auto prof = resolve_profile(profile_arg);
    auto r = render_file(input, prof);
    print_diagnostics(r.result.diagnostics);
    std::string log = transport::write_log(r.commands);
    if (output.empty())
        std::cout << log;
    else
        write_text_file(output, log);
    return 0;
}

int cmd_play(const std::string& input, const std::string& profile_arg,
             const std::string& backend_arg, bool virtual_clock) {
    auto prof = resolve_profile(profile_arg);
    auto r = render_file(input, prof);
    print_diagnostics(r.result.diagnostics);
    auto spec = parse_backend(backend_arg);

    std::unique_ptr<timeline::Clock> clock;
    if (virtual_clock)
        clock = std::make_unique<timeline::VirtualClock>();
    else
        clock = std::make_unique<timeline::SteadyClock>();

    timeline::PlaybackReport report;
    switch (spec.kind) {
        case BackendSpec::Kind::Null: {
            transport::NullBackend backend;
            report = timeline::playback(r.commands, *clock, backend);
            break;
        }
        case BackendSpec::Kind::Log: {
            TimedLogBackend backend(*clock);
            report = timeline::playback(r.commands, *clock, backend);
            write_text_file(spec.target, transport::write_log(backend.commands()));
            break;
        }
        case BackendSpec::Kind::Serial: {
            transport::SerialPort port(spec.target);
            SerialFrameBackend backend(port);
            report = timeline::playback(r.commands, *clock, backend);
            break;
        }
    }
    std::cout << "emitted " << report.commands_emitted << " commands, max lateness "
              << report.max_lateness_s * 1000.0 << " ms\n";
    if (report.max_lateness_s > 0.005)
        std::cerr << "warning: lateness exceeded the 5 ms budget\n";
    return 0;
}

int cmd_listen(const std::string& input_arg, const std::string& profile_arg,
               const std::string& backend_arg, bool passthrough) {
    auto prof = resolve_profile(profile_arg);
    auto spec = parse_backend(backend_arg);

    std::unique_ptr<timeline::Backend> backend;
    std::unique_ptr<transport::SerialPort> out_port;
    std::ofstream log_stream;
    timeline::VirtualClock wall;  // listen stamps log entries 0; live has no song clock
    std::unique_ptr<TimedLogBackend> log_backend;
    transport::NullBackend null_backend;
    timeline::Backend* sink = &null_backend;
    switch (spec.kind) {
        case BackendSpec::Kind::Null:
            break;
        case BackendSpec::Kind::Log:
            log_backend = std::make_unique<TimedLogBackend>(wall);
            sink = log_backend.get();
            break;
        case BackendSpec::Kind::Serial:
            out_port = std::make_unique<transport::SerialPort>(spec.target);
            backend = std::make_unique<SerialFrameBackend>(*out_port);
            sink = backend.get();
            break;
    }

    std::unique_ptr<transport::SerialPort> in_port;
    std::unique_ptr<std::istream> owned_in;
    std::istream* in = &std::cin;
    if (input_arg.rfind("serial:", 0) == 0) {
        // simplest portable route: serial device as a stream
        owned_in = std::make_unique<std::ifstream>(input_arg.substr(7), std::ios::binary);
        if (!*owned_in) throw DataError("cannot open " + input_arg.substr(7));
        in = owned_in.get();
    } else if (input_arg != "stdin") {
        throw CLI::ValidationError("--input", "expected stdin or serial:<port>");
    }

    // live mapping: a note-on drives its sites immediately, the matching
    // note-off releases them; virtual melody positions snap to the
    // nearest anchor since a live note has no known duration
    midi::DecoderState state;
    std::map<std::pair<int, int>, std::vector<layout::ActuatorSite>> active;
    uint64_t gestures = 0;

    auto on_message = [&](const midi::MidiMessage& m) {
        auto role_it = prof.channel_roles.find(m.channel);
        if (role_it == prof.channel_roles.end()) return;
        auto role = role_it->second;
        if (role == mapping::ChannelRole::Ignore) return;
        if (m.kind == midi::MessageKind::NoteOn) {
            std::vector<std::pair<layout::ActuatorSite, int>> drives;
            mapping::Diagnostics diag;
            switch (role) {
                case mapping::ChannelRole::Melody: {
                    int intensity = mapping::octave_band_intensity(m.data1, m.data2, prof, &diag);
                    if (prof.melody_mode == mapping::MelodyMode::FingerScript) {
                        auto it = prof.finger_table.find(m.data1);
                        if (it == prof.finger_table.end()) return;
                        drives.push_back(
                            {static_cast<layout::ActuatorSite>(it->second - 1), intensity});
                    } else {
                        auto loc = prof.circle.locate_pitch_class(m.data1 % 12);
                        drives.push_back(
                            {loc.fraction < 0.5 ? loc.anchor_a : loc.anchor_b, intensity});
                    }
                    break;
                }
                case mapping::ChannelRole::Chords: {
                    auto e = mapping::map_chord_note(m.data1, m.data2, 0, 1, prof, &diag);
                    drives.push_back({e.site, e.intensity});
                    break;
                }
                case mapping::ChannelRole::Bassline: {
                    auto e = mapping::map_bassline_note(m.data1, m.data2, 0, 1, prof, &diag);
                    drives.push_back({e.site, e.intensity});
                    break;
                }
                case mapping::ChannelRole::Percussion: {
                    for (auto& e : mapping::map_percussion(m.data1, m.data2, 0, prof, &diag))
                        drives.push_back({e.site, e.intensity});
                    break;
                }
                default:
                    return;
            }
            if (drives.empty()) return;
            std::vector<layout::ActuatorSite> sites;
            for (auto& [site, intensity] : drives) {
                sink->write(site, (uint8_t)intensity);
                sites.push_back(site);
            }
            active[{m.channel, m.data1}] = std::move(sites);
            gestures++;
        } else if (m.kind == midi::MessageKind::NoteOff) {
            auto it = active.find({m.channel, m.data1});
            if (it == active.end()) return;
            for (auto site : it->second) sink->write(site, 0);
            active.erase(it);
        }
    };

    transport::read_midi_source(*in, [&](std::span<const uint8_t> chunk) {
        if (passthrough && out_port) out_port->write_bytes(chunk.data(), chunk.size());
        for (const auto& m : midi::decode_stream(chunk, state)) on_message(m);
    });

    // end of stream: release anything still sounding
    for (auto& [key, sites] : active)
        for (auto site : sites) sink->write(site, 0);

    if (log_backend)
        write_text_file(spec.target, transport::write_log(log_backend->commands()));
    std::cerr << "end of stream: " << gestures << " gestures, " << state.stray_data_bytes
              << " stray bytes\n";
    return 0;
}

int cmd_inspect(const std::string& profile_arg, int note, const std::string& role,
                int velocity) {
    auto prof = resolve_profile(profile_arg);
    mapping::Diagnostics diag;
    std::vector<mapping::HapticEvent> events;
    const double duration = 0.5;
    if (role == "melody")
        events = mapping::map_melody_note(note, velocity, 0.0, duration, prof, &diag);
    else if (role == "chords")
        events = {mapping::map_chord_note(note, velocity, 0.0, duration, prof, &diag)};
    else if (role == "bassline")
        events = {mapping::map_bassline_note(note, velocity, 0.0, duration, prof, &diag)};
    else if (role == "percussion")
        events = mapping::map_percussion(note, velocity, 0.0, prof, &diag);
    else
        throw CLI::ValidationError("--role", "expected melody, chords, bassline or percussion");
    if (events.empty()) throw DataError("note " + std::to_string(note) + " maps to nothing");
    for (const auto& e : events) {
        char line[96];
        std::snprintf(line, sizeof(line), "%s intensity=%d t=%.3f dur=%.3f\n",
                      std::string(layout::site_name(e.site)).c_str(), (int)e.intensity, e.t_on,
                      e.duration);
        std::cout << line;
    }
    return 0;
}

int cmd_identify(const std::string& query_path, const std::string& candidates_dir) {
    std::ifstream qin(query_path);
    if (!qin) throw DataError("cannot open " + query_path);
    auto query = eval::fingerprint_from_commands(transport::read_log(qin));

    std::map<std::string, eval::Fingerprint> candidates;
    for (const auto& entry : fs::directory_iterator(candidates_dir)) {
        if (entry.path().extension() != ".log") continue;
        std::ifstream cin_(entry.path());
        if (!cin_) throw DataError("cannot open " + entry.path().string());
        candidates[entry.path().stem().string()] =
            eval::fingerprint_from_commands(transport::read_log(cin_));
    }
    if (candidates.empty()) throw DataError("no .log candidates in " + candidates_dir);
    auto result = eval::identify(query, candidates);
    char line[160];
    std::snprintf(line, sizeof(line), "%s score=%.4f\n", result.label.c_str(), result.score);
    std::cout << line;
    return 0;
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

int cmd_eval(const std::string& trials_path, int table1_total) {
    std::ifstream in(trials_path);
    if (!in) throw DataError("cannot open " + trials_path);
    auto trials = eval::read_trials_csv(in);
    if (trials.empty()) throw DataError("no trials in " + trials_path);

    std::vector<std::string> labels;
    for (const auto& t : trials) {
        for (const auto& l : {t.presented, t.answered})
            if (std::find(labels.begin(), labels.end(), l) == labels.end())
                labels.push_back(l);
    }
    std::sort(labels.begin(), labels.end());
    eval::ConfusionMatrix matrix(labels);
    for (const auto& t : trials) matrix.add(t.presented, t.answered);

    auto pr = eval::precision_recall(matrix);
    for (size_t l = 0; l < labels.size(); ++l)
        std::cout << labels[l] << ": precision=" << fmt_opt(pr[l].precision)
                  << " recall=" << fmt_opt(pr[l].recall) << "\n";

    auto stats = eval::accuracy_by_group(trials);
    std::cout << "trained: accuracy=" << fmt_opt(stats.trained.accuracy)
              << " mean_confidence=" << fmt_opt(stats.trained.mean_confidence) << "\n";
    std::cout << "untrained: accuracy=" << fmt_opt(stats.untrained.accuracy)
              << " mean_confidence=" << fmt_opt(stats.untrained.mean_confidence) << "\n";

    if (table1_total > 0) {
        if (labels.size() != 3)
            throw DataError("--table1-check needs exactly 3 labels, got " +
                            std::to_string(labels.size()));
        std::array<std::pair<double, double>, 3> targets;
        for (int l = 0; l < 3; ++l) {
            if (!pr[l].precision || !pr[l].recall)
                throw DataError("--table1-check needs defined precision/recall for " + labels[l]);
            targets[l] = {std::round(*pr[l].precision * 100) / 100,
                          std::round(*pr[l].recall * 100) / 100};
        }
        auto feasible = eval::table1_consistency(targets, table1_total, labels);
        std::cout << "table1-check: " << feasible.size() << " feasible matrices at total "
                  << table1_total << (feasible.empty() ? " (infeasible)" : "") << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MIDI to palm-haptics rendering engine"};
    app.require_subcommand(1);

    std::string input, output, profile_arg, backend_arg = "null";
    std::string query_path, candidates_dir, trials_path, role, listen_input = "stdin";
    int note = 0, velocity = 100, table1_total = 0;
    bool virtual_clock = false, passthrough = false;

    auto* render = app.add_subcommand("render", "Render a MIDI file to a command log");
    render->add_option("input", input, "input .mid file")->required();
    render->add_option("-p,--profile", profile_arg, "mapping profile (path or preset name)");
    render->add_option("-o,--output", output, "output log path (default stdout)");

    auto* play = app.add_subcommand("play", "Render and play against a clock");
    play->add_option("input", input, "input .mid file")->required();
    play->add_option("-p,--profile", profile_arg, "mapping profile");
    play->add_option("-b,--backend", backend_arg, "null | log:<path> | serial:<port>");
    play->add_flag("--virtual-clock", virtual_clock, "run as fast as possible, zero lateness");

    auto* listen = app.add_subcommand("listen", "Map a live MIDI byte stream");
    listen->add_option("-i,--input", listen_input, "stdin | serial:<port>");
    listen->add_option("-p,--profile", profile_arg, "mapping profile");
    listen->add_option("-b,--backend", backend_arg, "null | log:<path> | serial:<port>");
    listen->add_flag("--passthrough", passthrough,
                     "forward raw MIDI bytes to the serial backend unchanged");

    auto* inspect = app.add_subcommand("inspect-mapping", "Show the gesture a note produces");
    inspect->add_option("-p,--profile", profile_arg, "mapping profile");
    inspect->add_option("-n,--note", note, "MIDI note number")->required();
    inspect->add_option("-r,--role", role, "melody | chords | bassline | percussion")->required();
    inspect->add_option("-v,--velocity", velocity, "velocity 1-127");

    auto* identify = app.add_subcommand("identify", "Match a command log against candidates");
    identify->add_option("-q,--query", query_path, "query .log file")->required();
    identify->add_option("-c,--candidates", candidates_dir, "directory of candidate .log files")
        ->required();

    auto* eval_cmd = app.add_subcommand("eval", "Recognition metrics from a trials CSV");
    eval_cmd->add_option("-t,--trials", trials_path, "trials CSV file")->required();
    eval_cmd->add_option("--table1-check", table1_total,
                         "enumerate feasible confusion matrices at this trial total");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*render) return cmd_render(input, profile_arg, output);
        if (*play) return cmd_play(input, profile_arg, backend_arg, virtual_clock);
        if (*listen) return cmd_listen(listen_input, profile_arg, backend_arg, passthrough);
        if (*inspect) return cmd_inspect(profile_arg, note, role, velocity);
        if (*identify) return cmd_identify(query_path, candidates_dir);
        if (*eval_cmd) return cmd_eval(trials_path, table1_total);
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
