#pragma once

// Runs the adkit executable as a child process and captures its streams.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace clirun {

struct Result
{
  int code = -1;
  std::string out;
  std::string err;
};

inline std::string quote(const std::string& s)
{
  std::string q = "'";
  for (const char c : s)
    q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

inline std::string slurp(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Scratch directory removed on destruction.
class TempDir
{
public:
  explicit TempDir(const std::string& tag)
    : path_(std::filesystem::temp_directory_path() /
            ("adkit_" + tag + "_" + std::to_string(::getpid())))
  {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

private:
  std::filesystem::path path_;
};

inline Result run(const std::string& exe, const std::vector<std::string>& args)
{
  static int counter = 0;
  const auto err_path = std::filesystem::temp_directory_path() /
                        ("adkit_stderr_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::string cmd = quote(exe);
  for (const auto& a : args)
    cmd += " " + quote(a);
  cmd += " 2>" + quote(err_path.string());

  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe)
    return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0)
    r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err_path);
  std::filesystem::remove(err_path);
  return r;
}

} // namespace clirun
