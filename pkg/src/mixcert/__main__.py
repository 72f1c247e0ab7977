"""
mixcert 命令行入口
子命令：
1. certify    读取场景配置，估计 D 并判定沿网混合
2. identities 运行代数恒等式检查
3. axioms     抽样检查长度公理
"""
import argparse
import sys
from typing import List, Optional

from mixcert.core.api import run_axioms, run_certify, run_identity_checks
from mixcert.core.logger_config import setup_logger


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixcert",
        description="基于交换子判据的强混合数值认证工具",
    )
    parser.add_argument("--no-log-file", action="store_true", help="不写日志文件")
    sub = parser.add_subparsers(dest="command", required=True)

    certify = sub.add_parser("certify", help="按场景配置认证混合性")
    certify.add_argument("--config", required=True, help="场景配置文件 (TOML)")
    certify.add_argument("--out", required=True, help="输出目录")

    identities = sub.add_parser("identities", help="运行代数恒等式检查")
    identities.add_argument("--seed", type=int, default=0, help="随机种子")
    identities.add_argument("--max-dim", type=int, default=16, help="维数上限（不超过 64）")

    axioms = sub.add_parser("axioms", help="抽样检查长度公理")
    axioms.add_argument("--group", required=True, help="群类型: z<d>、f<r>、r<d> 或 const")
    axioms.add_argument("--samples", type=int, default=1000, help="样本对数")
    axioms.add_argument("--seed", type=int, default=0, help="随机种子")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """主入口函数"""
    args = build_parser().parse_args(argv)
    logger, _ = setup_logger(app_name="mixcert", file_output=not args.no_log_file)

    try:
        if args.command == "certify":
            return run_certify(args.config, args.out)
        if args.command == "identities":
            return run_identity_checks(args.seed, args.max_dim)
        return run_axioms(args.group, args.samples, args.seed)
    except KeyboardInterrupt:
        logger.info("用户中断操作")
        return 130


if __name__ == "__main__":
    sys.exit(main())
